use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AcquisitionResult;
use crate::dsp::{phasor_cycles, SignalBuffer};
use crate::error::{invalid, Result};
use crate::prn::{SpreadingCode, CODE_LENGTH};

/// GPS L1, used only to scale carrier aiding of the code loop.
pub const L1_CARRIER_HZ: f64 = 1575.42e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    pub dll_bw_hz: f64,
    pub pll_bw_hz: f64,
    pub correlator_spacing_chips: f64,
    pub integration_ms: f64,
    pub damping: f64,
    /// First-order FLL run before the PLL takes over, to absorb the
    /// acquisition frequency error.
    pub fll_bw_hz: f64,
    pub fll_pull_in_ms: f64,
    /// Steer the code NCO with the carrier Doppler scaled by R_c/f_rf.
    pub carrier_aiding: bool,
    pub rf_carrier_hz: f64,
    /// Prompt power this far below its initial level counts as faded.
    pub loss_of_lock_db: f64,
    pub loss_of_lock_epochs: usize,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            dll_bw_hz: 2.0,
            pll_bw_hz: 10.0,
            correlator_spacing_chips: 0.5,
            integration_ms: 1.0,
            damping: 0.707,
            fll_bw_hz: 25.0,
            fll_pull_in_ms: 50.0,
            carrier_aiding: false,
            rf_carrier_hz: L1_CARRIER_HZ,
            loss_of_lock_db: 10.0,
            loss_of_lock_epochs: 50,
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dll_bw_hz", self.dll_bw_hz),
            ("pll_bw_hz", self.pll_bw_hz),
            ("correlator_spacing_chips", self.correlator_spacing_chips),
            ("integration_ms", self.integration_ms),
            ("damping", self.damping),
            ("rf_carrier_hz", self.rf_carrier_hz),
            ("loss_of_lock_db", self.loss_of_lock_db),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.correlator_spacing_chips > 1.0 {
            return Err(invalid("correlator spacing must be at most one chip"));
        }
        if !(self.fll_bw_hz.is_finite() && self.fll_bw_hz >= 0.0) {
            return Err(invalid("fll_bw_hz must be non-negative"));
        }
        if !(self.fll_pull_in_ms.is_finite() && self.fll_pull_in_ms >= 0.0) {
            return Err(invalid("fll_pull_in_ms must be non-negative"));
        }
        if self.loss_of_lock_epochs == 0 {
            return Err(invalid("loss_of_lock_epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingRecord {
    pub epoch_s: f64,
    pub code_delay_samples: f64,
    pub doppler_hz: f64,
    pub prompt_i: f64,
    pub prompt_q: f64,
    pub dll_discriminator: f64,
    pub pll_discriminator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingTrace {
    pub prn: u8,
    pub records: Vec<TrackingRecord>,
    pub lost_lock: bool,
}

/// Second-order loop filter coefficients from noise bandwidth and damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFilter {
    tau1: f64,
    tau2: f64,
    period_s: f64,
    nco: f64,
    previous_error: f64,
}

impl LoopFilter {
    pub fn new(bandwidth_hz: f64, damping: f64, gain: f64, period_s: f64) -> Self {
        let wn = bandwidth_hz * 8.0 * damping / (4.0 * damping * damping + 1.0);
        Self {
            tau1: gain / (wn * wn),
            tau2: 2.0 * damping / wn,
            period_s,
            nco: 0.0,
            previous_error: 0.0,
        }
    }

    /// Feeds one discriminator output and returns the NCO correction.
    pub fn update(&mut self, error: f64) -> f64 {
        self.nco += self.tau2 / self.tau1 * (error - self.previous_error) + error * self.period_s / self.tau1;
        self.previous_error = error;
        self.nco
    }

    pub fn reset(&mut self) {
        self.nco = 0.0;
        self.previous_error = 0.0;
    }
}

/// Normalised early-minus-late envelope discriminator.
pub fn dll_discriminator(early: Complex64, late: Complex64) -> f64 {
    let (e, l) = (early.norm(), late.norm());
    if e + l == 0.0 {
        0.0
    } else {
        (e - l) / (e + l)
    }
}

/// Costas discriminator atan(Q/I), in cycles; insensitive to data bits.
pub fn pll_discriminator(prompt: Complex64) -> f64 {
    if prompt.re == 0.0 {
        return 0.0;
    }
    (prompt.im / prompt.re).atan() / TAU
}

/// Frequency discriminator from two consecutive prompts, in Hz; also
/// insensitive to a bit flip between them.
fn fll_discriminator(previous: Complex64, prompt: Complex64, period_s: f64) -> f64 {
    let z = prompt * previous.conj();
    if z.re == 0.0 {
        return 0.0;
    }
    (z.im / z.re).atan() / (TAU * period_s)
}

/// DLL/PLL tracking starting from an acquisition. Each epoch integrates a
/// whole number of code periods spanning `integration_ms`.
pub fn track(
    buf: &SignalBuffer,
    code: &SpreadingCode,
    init: &AcquisitionResult,
    cfg: &TrackingConfig,
) -> Result<TrackingTrace> {
    cfg.validate()?;
    if !init.acquired {
        return Err(invalid(format!("PRN {} was not acquired", init.prn)));
    }
    let fs = buf.sample_rate_hz();
    let rc = code.chipping_rate_hz();
    let periods = ((cfg.integration_ms * 1e-3) / code.period_s()).round().max(1.0) as usize;
    let epoch_chips = (periods * CODE_LENGTH) as f64;
    let t_int = epoch_chips / rc;
    let nominal_epoch_samples = t_int * fs;
    let start = init.code_phase_samples;
    if (buf.len() as f64) < start as f64 + 10.0 * nominal_epoch_samples {
        return Err(invalid("buffer shorter than ten integration periods after the code phase"));
    }

    let f_if = buf.if_offset_hz();
    let spacing = cfg.correlator_spacing_chips;
    let mut dll = LoopFilter::new(cfg.dll_bw_hz, cfg.damping, 1.0, t_int);
    let mut pll = LoopFilter::new(cfg.pll_bw_hz, cfg.damping, 0.25, t_int);
    let fll_gain = 4.0 * cfg.fll_bw_hz * t_int;
    let fll_epochs = (cfg.fll_pull_in_ms * 1e-3 / t_int).round() as usize;

    let mut carrier_basis = f_if + init.doppler_hz();
    let mut carrier_freq = carrier_basis;
    let mut code_freq = rc;
    let mut rem_code = 0.0f64;
    let mut rem_carrier = 0.0f64; // cycles
    let mut read = start;
    let mut previous_prompt: Option<Complex64> = None;

    let mut records = Vec::new();
    let mut reference_power = 0.0;
    let mut faded_run = 0usize;
    let mut lost_lock = false;
    let samples = buf.samples();

    for epoch in 0.. {
        let code_step = code_freq / fs;
        let block = ((epoch_chips - rem_code) / code_step).ceil() as usize;
        if read + block > samples.len() {
            break;
        }
        let x = &samples[read..read + block];

        let carrier_step = carrier_freq / fs;
        let rotation = phasor_cycles(-carrier_step);
        let mut lo = phasor_cycles(-rem_carrier);
        let (mut early, mut prompt, mut late) = (Complex64::default(), Complex64::default(), Complex64::default());
        for (i, &s) in x.iter().enumerate() {
            let base = s * lo;
            let phase = rem_code + i as f64 * code_step;
            early += base * code.chip((phase + spacing).floor() as i64);
            prompt += base * code.chip(phase.floor() as i64);
            late += base * code.chip((phase - spacing).floor() as i64);
            lo *= rotation;
            if i % 1024 == 1023 {
                lo = phasor_cycles(-(rem_carrier + (i + 1) as f64 * carrier_step));
            }
        }
        let code_start = read as f64 - rem_code / code_step;
        rem_code += block as f64 * code_step - epoch_chips;
        let carrier_cycles = rem_carrier + block as f64 * carrier_step;
        rem_carrier = carrier_cycles - carrier_cycles.floor();
        read += block;

        let pll_error = pll_discriminator(prompt);
        let dll_error = dll_discriminator(early, late);

        if epoch < fll_epochs {
            if let Some(prev) = previous_prompt {
                carrier_freq += fll_gain * fll_discriminator(prev, prompt, t_int);
            }
            if epoch + 1 == fll_epochs {
                carrier_basis = carrier_freq;
                pll.reset();
            }
        } else {
            carrier_freq = carrier_basis + pll.update(pll_error);
        }
        previous_prompt = Some(prompt);
        let code_nco = dll.update(dll_error);
        code_freq = rc + code_nco;
        if cfg.carrier_aiding {
            code_freq += (carrier_freq - f_if) * rc / cfg.rf_carrier_hz;
        }

        records.push(TrackingRecord {
            epoch_s: (start as f64 + epoch as f64 * nominal_epoch_samples) / fs,
            code_delay_samples: code_start - epoch as f64 * nominal_epoch_samples,
            doppler_hz: carrier_freq - f_if,
            prompt_i: prompt.re,
            prompt_q: prompt.im,
            dll_discriminator: dll_error,
            pll_discriminator: pll_error,
        });

        let power = prompt.norm_sqr();
        if epoch < 10 {
            reference_power += power / 10.0;
        } else if power < reference_power * 10f64.powf(-cfg.loss_of_lock_db / 10.0) {
            faded_run += 1;
            if faded_run >= cfg.loss_of_lock_epochs {
                lost_lock = true;
                records.truncate(records.len() - faded_run);
                break;
            }
        } else {
            faded_run = 0;
        }
    }
    Ok(TrackingTrace {
        prn: code.prn(),
        records,
        lost_lock,
    })
}
