use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{phasor_cycles, FftCorrelator, SignalBuffer};
use crate::error::{invalid, Error, Result};
use crate::prn::{SpreadingCode, CODE_LENGTH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub freq_search_min_hz: f64,
    pub freq_search_max_hz: f64,
    pub freq_step_hz: f64,
    pub snr_threshold_db: f64,
    pub coherent_ms: f64,
    pub fine_freq_ms: f64,
    /// Keep the full |corr|² surface in the result.
    pub keep_surface: bool,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            freq_search_min_hz: -5000.0,
            freq_search_max_hz: 5000.0,
            freq_step_hz: 500.0,
            snr_threshold_db: 25.0,
            coherent_ms: 1.0,
            fine_freq_ms: 10.0,
            keep_surface: false,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.freq_step_hz.is_finite() && self.freq_step_hz > 0.0) {
            return Err(invalid("freq_step_hz must be positive"));
        }
        if !(self.freq_search_min_hz.is_finite()
            && self.freq_search_max_hz.is_finite()
            && self.freq_search_min_hz < self.freq_search_max_hz)
        {
            return Err(invalid("frequency search range must satisfy min < max"));
        }
        if !(self.coherent_ms.is_finite() && self.coherent_ms > 0.0) {
            return Err(invalid("coherent_ms must be positive"));
        }
        if !(self.fine_freq_ms.is_finite() && self.fine_freq_ms >= self.coherent_ms) {
            return Err(invalid("fine_freq_ms must be at least coherent_ms"));
        }
        if !self.snr_threshold_db.is_finite() {
            return Err(invalid("snr_threshold_db must be finite"));
        }
        Ok(())
    }

    /// Doppler bin centres, min to max inclusive.
    pub fn frequency_bins(&self) -> Vec<f64> {
        let count = ((self.freq_search_max_hz - self.freq_search_min_hz) / self.freq_step_hz + 1e-9)
            .floor() as usize
            + 1;
        (0..count)
            .map(|k| self.freq_search_min_hz + k as f64 * self.freq_step_hz)
            .collect()
    }

    /// FFT bin width of the fine frequency search.
    pub fn fine_resolution_hz(&self) -> f64 {
        1000.0 / self.fine_freq_ms / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub prn: u8,
    pub acquired: bool,
    /// Sample at which a code period starts, in `[0, code period)`.
    pub code_phase_samples: usize,
    pub coarse_freq_hz: f64,
    /// Set when the source was acquired and the buffer covers the fine window.
    pub fine_freq_hz: Option<f64>,
    pub snr_db: f64,
    /// Number of lags averaged in the noise term.
    pub noise_lags: usize,
    /// `surface[bin][lag]` = |corr|², when requested.
    #[serde(skip)]
    pub correlation_surface: Option<Vec<Vec<f64>>>,
}

impl AcquisitionResult {
    /// Best available Doppler estimate.
    pub fn doppler_hz(&self) -> f64 {
        self.fine_freq_hz.unwrap_or(self.coarse_freq_hz)
    }
}

/// Samples per chip and per code period.
fn code_geometry(buf: &SignalBuffer, code: &SpreadingCode) -> (f64, f64) {
    let ns = buf.sample_rate_hz() / code.chipping_rate_hz();
    (ns, ns * CODE_LENGTH as f64)
}

/// Local code sampled at the buffer rate, chip 0 starting at `start`.
pub(crate) fn code_replica(code: &SpreadingCode, sample_rate_hz: f64, n: usize, start: usize) -> Vec<f64> {
    let step = code.chipping_rate_hz() / sample_rate_hz;
    (0..n)
        .map(|i| code.chip(((i as f64 - start as f64) * step).floor() as i64))
        .collect()
}

/// Peak-to-noise ratio of one correlation row, with the row holding
/// correlation power. Lags closer than `ns` samples to the peak, or to a
/// repeat of it one code period away, are left out of the noise average.
/// Returns (SNR in dB, number of noise lags used).
pub fn peak_to_noise_db(row: &[f64], peak: usize, ns: f64, period_samples: f64) -> (f64, usize) {
    let n = row.len();
    let repeats = (n as f64 / period_samples).round().max(1.0) as i64;
    let excluded = |k: usize| {
        (-1..=repeats).any(|m| {
            let centre = peak as f64 + m as f64 * period_samples;
            let mut d = (k as f64 - centre).rem_euclid(n as f64);
            if d > n as f64 / 2.0 {
                d -= n as f64;
            }
            d.abs() < ns
        })
    };
    let (sum, count) = row
        .iter()
        .enumerate()
        .filter(|&(k, _)| !excluded(k))
        .fold((0.0, 0usize), |(s, c), (_, &r)| (s + r * r, c + 1));
    if count == 0 || sum == 0.0 {
        return (f64::INFINITY, count);
    }
    let peak_sq = row[peak] * row[peak];
    (10.0 * (peak_sq / (sum / count as f64)).log10(), count)
}

/// Parallel code phase search over the Doppler bins, SNR gate, and fine
/// frequency for acquired sources.
pub fn acquire(buf: &SignalBuffer, code: &SpreadingCode, cfg: &AcquisitionConfig) -> Result<AcquisitionResult> {
    cfg.validate()?;
    let fs = buf.sample_rate_hz();
    let n = (cfg.coherent_ms * 1e-3 * fs).round() as usize;
    if n == 0 || buf.len() < n {
        return Err(invalid(format!(
            "acquisition needs {n} samples, buffer has {}",
            buf.len()
        )));
    }
    let (ns, period) = code_geometry(buf, code);
    let replica: Vec<Complex64> = code_replica(code, fs, n, 0)
        .into_iter()
        .map(|c| Complex64::new(c, 0.0))
        .collect();
    let correlator = FftCorrelator::new(&replica)?;
    let segment = &buf.samples()[..n];

    let bins = cfg.frequency_bins();
    let mut surface = Vec::with_capacity(bins.len());
    let mut best = (0usize, 0usize, -1.0f64);
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for (b, &f) in bins.iter().enumerate() {
        let step = -(buf.if_offset_hz() + f) / fs;
        for (i, (out, &x)) in row.iter_mut().zip(segment).enumerate() {
            *out = x * phasor_cycles(step * i as f64);
        }
        correlator.correlate_in_place(&mut row);
        let power: Vec<f64> = row.iter().map(|v| v.norm_sqr()).collect();
        if let Some((k, &p)) = power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
            if p > best.2 {
                best = (b, k, p);
            }
        }
        surface.push(power);
    }
    let (bin, lag, _) = best;
    let (snr_db, noise_lags) = peak_to_noise_db(&surface[bin], lag, ns, period);
    let code_phase = ((lag as f64).rem_euclid(period).round() as usize) % (period.round() as usize);
    let acquired = snr_db >= cfg.snr_threshold_db;
    let coarse = bins[bin];
    let fine_freq_hz = if acquired {
        match fine_frequency(buf, code, code_phase, coarse, cfg) {
            Ok(f) => Some(f),
            Err(Error::OutOfRange(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(AcquisitionResult {
        prn: code.prn(),
        acquired,
        code_phase_samples: code_phase,
        coarse_freq_hz: coarse,
        fine_freq_hz,
        snr_db,
        noise_lags,
        correlation_surface: cfg.keep_surface.then_some(surface),
    })
}

/// Strips the code at `tau_samples` and the carrier at `f_IF + coarse_hz`
/// over `fine_freq_ms`, then picks the strongest 4× zero-padded FFT bin
/// within one coarse step of the coarse estimate.
///
/// A navigation bit edge inside the window splits the residual tone and can
/// bias the estimate.
pub fn fine_frequency(
    buf: &SignalBuffer,
    code: &SpreadingCode,
    tau_samples: usize,
    coarse_hz: f64,
    cfg: &AcquisitionConfig,
) -> Result<f64> {
    cfg.validate()?;
    let fs = buf.sample_rate_hz();
    let (_, period) = code_geometry(buf, code);
    if tau_samples as f64 >= period {
        return Err(invalid(format!(
            "code phase {tau_samples} outside one code period ({period:.1} samples)"
        )));
    }
    let n = (cfg.fine_freq_ms * 1e-3 * fs).round() as usize;
    if buf.len() < n {
        return Err(Error::OutOfRange(format!(
            "fine frequency needs {n} samples, buffer has {}",
            buf.len()
        )));
    }
    // Block sums decimate to a rate of at least 20 coarse steps.
    let max_block = ((fs / (20.0 * cfg.freq_step_hz)).floor() as usize).max(1);
    let block = (1..=max_block).rev().find(|b| n % b == 0).unwrap_or(1);
    let blocks = n / block;
    let replica = code_replica(code, fs, n, tau_samples);
    let step = -(buf.if_offset_hz() + coarse_hz) / fs;
    let nfft = 4 * blocks;
    let mut x = vec![Complex64::new(0.0, 0.0); nfft];
    for (i, (&s, &c)) in buf.samples()[..n].iter().zip(&replica).enumerate() {
        x[i / block] += s * c * phasor_cycles(step * i as f64);
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut x);
    let bin_hz = fs / block as f64 / nfft as f64;
    let reach = (cfg.freq_step_hz / bin_hz).floor() as i64;
    let best = (-reach..=reach)
        .max_by(|&a, &b| {
            let pa = x[a.rem_euclid(nfft as i64) as usize].norm_sqr();
            let pb = x[b.rem_euclid(nfft as i64) as usize].norm_sqr();
            pa.total_cmp(&pb)
        })
        .unwrap_or(0);
    Ok(coarse_hz + best as f64 * bin_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prn::generate_ca_code;

    #[test]
    fn bins_include_both_ends() {
        let cfg = AcquisitionConfig::default();
        let bins = cfg.frequency_bins();
        assert_eq!(bins.len(), 21);
        assert_eq!(bins[0], -5000.0);
        assert_eq!(bins[10], 0.0);
        assert_eq!(bins[20], 5000.0);
    }

    #[test]
    fn resolution_scales_with_window() {
        let mut cfg = AcquisitionConfig::default();
        assert_eq!(cfg.fine_resolution_hz(), 25.0);
        cfg.fine_freq_ms = 20.0;
        assert_eq!(cfg.fine_resolution_hz(), 12.5);
    }

    #[test]
    fn config_validation() {
        let mut c = AcquisitionConfig::default();
        c.freq_step_hz = 0.0;
        assert!(c.validate().is_err());
        let mut c = AcquisitionConfig::default();
        c.freq_search_min_hz = 6000.0;
        assert!(c.validate().is_err());
        let mut c = AcquisitionConfig::default();
        c.fine_freq_ms = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn noise_lag_count_excludes_peak_neighbourhood() {
        let row = vec![1.0; 1000];
        // ns = 10 excludes 19 lags around the peak
        let (_, count) = peak_to_noise_db(&row, 500, 10.0, 1000.0);
        assert_eq!(count, 1000 - 19);
        // wrap-around at the edge
        let (_, count) = peak_to_noise_db(&row, 3, 10.0, 1000.0);
        assert_eq!(count, 1000 - 19);
        // a code period of 250 samples repeats the exclusion four times
        let (_, count) = peak_to_noise_db(&row, 100, 10.0, 250.0);
        assert_eq!(count, 1000 - 4 * 19);
    }

    #[test]
    fn snr_uses_power_squared() {
        let mut row = vec![2.0; 100];
        row[40] = 20.0;
        let (snr, _) = peak_to_noise_db(&row, 40, 1.0, 100.0);
        assert!((snr - 20.0).abs() < 1e-12);
    }

    #[test]
    fn short_buffer_rejected() {
        let buf = SignalBuffer::zeros(100, 38.192e6).unwrap();
        let code = generate_ca_code(1).unwrap();
        assert!(acquire(&buf, &code, &AcquisitionConfig::default()).is_err());
    }

    #[test]
    fn fine_frequency_rejects_bad_phase() {
        let buf = SignalBuffer::zeros(400_000, 38.192e6).unwrap();
        let code = generate_ca_code(1).unwrap();
        assert!(fine_frequency(&buf, &code, 40_000, 0.0, &AcquisitionConfig::default()).is_err());
    }
}
