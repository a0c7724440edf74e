use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::SourceChannel;
use crate::error::{invalid, Result};

pub const DEFAULT_SPECTRUM_NFFT: usize = 1024;

/// Floor applied before taking logarithms.
const POWER_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Ascending, spanning (−f_ch/2, f_ch/2].
    pub freq_hz: Vec<f64>,
    pub power_db: Vec<f64>,
}

impl SpectrumResult {
    /// (frequency, power) of the strongest bin.
    pub fn peak(&self) -> (f64, f64) {
        let i = (0..self.power_db.len())
            .max_by(|&a, &b| self.power_db[a].total_cmp(&self.power_db[b]))
            .unwrap_or(0);
        (self.freq_hz[i], self.power_db[i])
    }
}

/// Hann-windowed periodogram of the path-summed coefficients of one source,
/// over the first `nfft` snapshots. Normalised so that a unit-amplitude tone
/// on a bin centre reads 0 dB.
pub fn doppler_spectrum(
    source: &SourceChannel,
    update_rate_hz: f64,
    nfft: usize,
) -> Result<SpectrumResult> {
    if !nfft.is_power_of_two() || nfft < 2 {
        return Err(invalid(format!("nfft must be a power of two ≥ 2, got {nfft}")));
    }
    if nfft > source.snapshots() {
        return Err(invalid(format!(
            "nfft {nfft} exceeds the {} available snapshots",
            source.snapshots()
        )));
    }
    if !(update_rate_hz.is_finite() && update_rate_hz > 0.0) {
        return Err(invalid("channel update rate must be positive"));
    }
    let window: Vec<f64> = (0..nfft)
        .map(|t| 0.5 * (1.0 - (TAU * t as f64 / nfft as f64).cos()))
        .collect();
    let mut x: Vec<Complex64> = (0..nfft)
        .map(|t| {
            let sum: Complex64 = source.paths().iter().map(|p| p.coefficients()[t]).sum();
            sum * window[t]
        })
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut x);
    let norm = window.iter().sum::<f64>().powi(2);
    let half = (nfft / 2) as i64;
    let df = update_rate_hz / nfft as f64;
    let (freq_hz, power_db) = (-half + 1..=half)
        .map(|b| {
            let p = x[b.rem_euclid(nfft as i64) as usize].norm_sqr() / norm;
            (b as f64 * df, 10.0 * p.max(POWER_FLOOR).log10())
        })
        .unzip();
    Ok(SpectrumResult { freq_hz, power_db })
}
