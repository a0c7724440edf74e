//! Satellite/HAPS CDMA waveform synthesis: spread, modulate onto the IF
//! carrier, then delay, weight and sum the paths of every source.

use std::collections::{BTreeMap, HashSet};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, CoefficientInterpolator, SourceChannel};
use crate::dsp::{add_awgn, noise_power_dbw_for_cn0, phasor_cycles, DelayKernel, Resampler, SignalBuffer};
use crate::error::{invalid, Error, Result};
use crate::prn::{generate_ca_code, SpreadingCode, CA_CHIPPING_RATE_HZ, CODE_LENGTH};

pub const SATELLITE_SAMPLE_RATE_HZ: f64 = 38.192e6;
pub const SATELLITE_IF_HZ: f64 = 9.548e6;
pub const HAPS_IF_HZ: f64 = 15e6;
pub const HAPS_CHIPPING_RATE_HZ: f64 = 10.23e6;
/// Twice the satellite rate; the satellite rate is too low for the HAPS
/// carrier plus chip bandwidth.
pub const HAPS_SAMPLE_RATE_HZ: f64 = 2.0 * SATELLITE_SAMPLE_RATE_HZ;
pub const NAV_BIT_DURATION_S: f64 = 0.020;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdmaSource {
    pub source_id: String,
    pub prn: u8,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdmaGenConfig {
    pub f_s_hz: f64,
    pub f_if_hz: f64,
    pub r_c_hz: f64,
    pub t_d_s: f64,
    pub duration_s: f64,
    pub data_seed: u64,
    /// Modulate the random navigation bits; off gives a pure spread carrier.
    #[serde(default = "default_true")]
    pub data_modulation: bool,
    /// Noise is added when set; referenced to a unit-power carrier.
    #[serde(default)]
    pub cn0_dbhz: Option<f64>,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub sources: Vec<CdmaSource>,
}

impl CdmaGenConfig {
    pub fn satellite(duration_s: f64) -> Self {
        Self {
            f_s_hz: SATELLITE_SAMPLE_RATE_HZ,
            f_if_hz: SATELLITE_IF_HZ,
            r_c_hz: CA_CHIPPING_RATE_HZ,
            t_d_s: NAV_BIT_DURATION_S,
            duration_s,
            data_seed: 0,
            data_modulation: true,
            cn0_dbhz: None,
            noise_seed: 0,
            sources: Vec::new(),
        }
    }

    pub fn haps(duration_s: f64) -> Self {
        Self {
            f_s_hz: HAPS_SAMPLE_RATE_HZ,
            f_if_hz: HAPS_IF_HZ,
            r_c_hz: HAPS_CHIPPING_RATE_HZ,
            ..Self::satellite(duration_s)
        }
    }

    /// Adds a source, builder style.
    pub fn with_source(mut self, source_id: impl Into<String>, prn: u8) -> Self {
        self.sources.push(CdmaSource {
            source_id: source_id.into(),
            prn,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f_s_hz", self.f_s_hz),
            ("r_c_hz", self.r_c_hz),
            ("t_d_s", self.t_d_s),
            ("duration_s", self.duration_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.f_if_hz.is_finite() && self.f_if_hz >= 0.0) {
            return Err(invalid(format!("f_if_hz must be non-negative, got {}", self.f_if_hz)));
        }
        let needed = 2.0 * (self.f_if_hz + self.r_c_hz);
        if self.f_s_hz <= needed {
            return Err(invalid(format!(
                "f_s_hz {} must exceed 2·(f_if_hz + r_c_hz) = {needed}",
                self.f_s_hz
            )));
        }
        let periods = self.t_d_s * self.r_c_hz / CODE_LENGTH as f64;
        if periods < 0.5 || (periods - periods.round()).abs() > 1e-9 * periods {
            return Err(invalid(format!(
                "t_d_s {} is not a whole number of code periods",
                self.t_d_s
            )));
        }
        if let Some(cn0) = self.cn0_dbhz {
            if !cn0.is_finite() {
                return Err(invalid("cn0_dbhz must be finite"));
            }
        }
        let mut seen = HashSet::new();
        for s in &self.sources {
            generate_ca_code(s.prn)?;
            if !seen.insert(s.source_id.as_str()) {
                return Err(invalid(format!("duplicate source {}", s.source_id)));
            }
        }
        if self.sample_count() == 0 {
            return Err(invalid("duration shorter than one sample"));
        }
        Ok(())
    }

    /// round(f_s·T).
    pub fn sample_count(&self) -> usize {
        (self.f_s_hz * self.duration_s).round() as usize
    }

    /// Spreading code for a PRN at this configuration's chipping rate.
    pub fn code(&self, prn: u8) -> Result<SpreadingCode> {
        generate_ca_code(prn)?.with_chipping_rate(self.r_c_hz)
    }
}

/// `d(t)·c(t)·exp(j2π·f_IF·t)` sampled at `cfg.f_s_hz`.
///
/// Chips are laid out on a grid at an integer multiple of the chipping rate,
/// so every chip edge falls on a sample, and the result is brought to f_s by
/// the polyphase resampler. The grid starts early enough that the
/// resampler's start-up transient lands before t = 0 and is dropped.
pub fn generate_clean_signal(code: &SpreadingCode, cfg: &CdmaGenConfig) -> Result<SignalBuffer> {
    cfg.validate()?;
    if (code.chipping_rate_hz() - cfg.r_c_hz).abs() > 1e-9 * cfg.r_c_hz {
        return Err(invalid(format!(
            "code chipping rate {} differs from r_c_hz {}",
            code.chipping_rate_hz(),
            cfg.r_c_hz
        )));
    }
    let n = cfg.sample_count();
    let oversample = (cfg.f_s_hz / cfg.r_c_hz).ceil() as i64;
    let f_gen = oversample as f64 * cfg.r_c_hz;
    let chips_per_bit = (cfg.t_d_s * cfg.r_c_hz).round() as i64;
    let bits = data_bits(cfg, code.prn(), (n as f64 / cfg.f_s_hz / cfg.t_d_s).ceil() as usize + 1);

    let render = |i: i64| -> Complex64 {
        let chip_index = i.div_euclid(oversample);
        let bit = bits[(chip_index.max(0) / chips_per_bit) as usize];
        let t = i as f64 / f_gen;
        phasor_cycles(cfg.f_if_hz * t) * (bit * code.chip(chip_index))
    };

    let resampler = Resampler::new(f_gen, cfg.f_s_hz)?;
    let ratio = resampler.ratio();
    let samples = if ratio.up == ratio.down {
        (0..n as i64).map(render).collect()
    } else {
        // lead-in of whole blocks of `down` inputs maps to `up` outputs exactly
        let half_len = resampler.num_taps().div_ceil(2 * ratio.up as usize) + 1;
        let blocks = half_len.div_ceil(ratio.down as usize);
        let lead_in = blocks * ratio.down as usize;
        let skip = blocks * ratio.up as usize;
        let n_gen = (n + skip + 2 * half_len * ratio.up as usize).div_ceil(ratio.up as usize)
            * ratio.down as usize;
        let gen: Vec<Complex64> = (0..n_gen as i64).map(|i| render(i - lead_in as i64)).collect();
        let mut out = resampler.process(&gen);
        out.drain(..skip);
        out.truncate(n);
        out
    };
    SignalBuffer::with_metadata(samples, cfg.f_s_hz, cfg.f_if_hz, 0.0)
}

fn data_bits(cfg: &CdmaGenConfig, prn: u8, count: usize) -> Vec<f64> {
    if !cfg.data_modulation {
        return vec![1.0; count];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
    rng.set_stream(prn as u64);
    (0..count)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Running sum of delayed, channel-weighted source signals.
pub(crate) struct PathCombiner {
    out: Vec<Complex64>,
    sample_rate_hz: f64,
    if_offset_hz: Option<f64>,
    update_rate_hz: f64,
    d_min_s: f64,
}

impl PathCombiner {
    pub(crate) fn new(len: usize, sample_rate_hz: f64, update_rate_hz: f64, d_min_s: f64) -> Self {
        Self {
            out: vec![Complex64::new(0.0, 0.0); len],
            sample_rate_hz,
            if_offset_hz: None,
            update_rate_hz,
            d_min_s,
        }
    }

    /// Adds Σ_k delay(clean, D[k,0] − D_min)·H̃[k] for one source.
    pub(crate) fn add(&mut self, clean: &SignalBuffer, source: &SourceChannel) -> Result<()> {
        let id = source.source_id();
        if clean.len() != self.out.len() {
            return Err(invalid(format!(
                "source {id}: {} samples, expected {}",
                clean.len(),
                self.out.len()
            )));
        }
        if clean.sample_rate_hz() != self.sample_rate_hz {
            return Err(invalid(format!(
                "source {id}: sample rate {} differs from {}",
                clean.sample_rate_hz(),
                self.sample_rate_hz
            )));
        }
        match self.if_offset_hz {
            Some(f) if f != clean.if_offset_hz() => {
                return Err(invalid(format!("source {id}: IF differs from other sources")))
            }
            _ => self.if_offset_hz = Some(clean.if_offset_hz()),
        }
        let n = self.out.len();
        let covered = (source.snapshots() + 1) as f64 * self.sample_rate_hz / self.update_rate_hz;
        if n as f64 > covered * (1.0 + 1e-9) {
            return Err(Error::OutOfRange(format!(
                "channel for {id} covers {covered:.0} samples, signal has {n}"
            )));
        }
        let x = clean.samples();
        for path in source.paths() {
            let rel = path.initial_delay_s() - self.d_min_s;
            if rel < 0.0 {
                return Err(invalid(format!(
                    "source {id}: path delay precedes the reference delay"
                )));
            }
            let kernel = DelayKernel::new(rel * self.sample_rate_hz, clean.if_offset_hz(), self.sample_rate_hz);
            let interp = CoefficientInterpolator::new(path, self.update_rate_hz, self.sample_rate_hz)?;
            for i in kernel.first_index().min(n)..n {
                self.out[i] += kernel.at(x, i) * interp.coefficient(i);
            }
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> Result<SignalBuffer> {
        SignalBuffer::with_metadata(self.out, self.sample_rate_hz, self.if_offset_hz.unwrap_or(0.0), 0.0)
    }
}

/// Delays every path by its initial delay relative to the earliest path of
/// any source, weights it by the interpolated coefficients and sums, source
/// by source in channel-set order.
pub fn apply_channel_and_sum(
    clean: &BTreeMap<String, SignalBuffer>,
    channels: &ChannelSet,
) -> Result<SignalBuffer> {
    let d_min = channels
        .min_initial_delay_s()
        .ok_or_else(|| invalid("channel set has no sources"))?;
    apply_channel_and_sum_with_reference(clean, channels, d_min)
}

/// As [`apply_channel_and_sum`] with an explicit D_min, so that partial sums
/// over subsets of sources line up.
pub fn apply_channel_and_sum_with_reference(
    clean: &BTreeMap<String, SignalBuffer>,
    channels: &ChannelSet,
    d_min_s: f64,
) -> Result<SignalBuffer> {
    if channels.sources().is_empty() {
        return Err(invalid("channel set has no sources"));
    }
    let first = channels.sources()[0].source_id();
    let reference = clean
        .get(first)
        .ok_or_else(|| invalid(format!("no clean signal for source {first}")))?;
    let mut combiner = PathCombiner::new(
        reference.len(),
        reference.sample_rate_hz(),
        channels.update_rate_hz(),
        d_min_s,
    );
    for source in channels.sources() {
        let buf = clean
            .get(source.source_id())
            .ok_or_else(|| invalid(format!("no clean signal for source {}", source.source_id())))?;
        combiner.add(buf, source)?;
    }
    combiner.finish()
}

/// Full pipeline: clean signal per configured source, channel, sum, then
/// optional noise.
pub fn synthesize(cfg: &CdmaGenConfig, channels: &ChannelSet) -> Result<SignalBuffer> {
    let d_min = reference_delay(cfg, channels)?;
    synthesize_with_reference(cfg, channels, d_min)
}

/// D_min over the channels of the configured sources.
pub fn reference_delay(cfg: &CdmaGenConfig, channels: &ChannelSet) -> Result<f64> {
    let ids: Vec<&str> = cfg.sources.iter().map(|s| s.source_id.as_str()).collect();
    if ids.is_empty() {
        return Err(invalid("no sources configured"));
    }
    channels
        .subset(&ids)?
        .min_initial_delay_s()
        .ok_or_else(|| invalid("no sources configured"))
}

pub fn synthesize_with_reference(
    cfg: &CdmaGenConfig,
    channels: &ChannelSet,
    d_min_s: f64,
) -> Result<SignalBuffer> {
    cfg.validate()?;
    if cfg.sources.is_empty() {
        return Err(invalid("no sources configured"));
    }
    let mut combiner = PathCombiner::new(
        cfg.sample_count(),
        cfg.f_s_hz,
        channels.update_rate_hz(),
        d_min_s,
    );
    // one clean buffer alive at a time keeps the footprint flat
    for s in &cfg.sources {
        let source = channels
            .source(&s.source_id)
            .ok_or_else(|| invalid(format!("no channel for source {}", s.source_id)))?;
        let clean = generate_clean_signal(&cfg.code(s.prn)?, cfg)?;
        combiner.add(&clean, source)?;
    }
    let out = combiner.finish()?;
    Ok(match cfg.cn0_dbhz {
        Some(cn0) => add_awgn(&out, noise_power_dbw_for_cn0(1.0, cn0, cfg.f_s_hz), cfg.noise_seed),
        None => out,
    })
}

/// What a receiver should find for one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTruth {
    pub source_id: String,
    pub prn: u8,
    pub los: bool,
    /// Path-0 delay relative to D_min.
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub power: f64,
}

pub fn ground_truth(cfg: &CdmaGenConfig, channels: &ChannelSet) -> Result<Vec<SourceTruth>> {
    let d_min = reference_delay(cfg, channels)?;
    cfg.sources
        .iter()
        .map(|s| {
            let ch = channels
                .source(&s.source_id)
                .ok_or_else(|| invalid(format!("no channel for source {}", s.source_id)))?;
            Ok(SourceTruth {
                source_id: s.source_id.clone(),
                prn: s.prn,
                los: ch.los(),
                delay_s: ch.initial_delay_s() - d_min,
                doppler_hz: ch.path0_doppler_hz(channels.update_rate_hz()),
                power: ch.total_power(),
            })
        })
        .collect()
}
