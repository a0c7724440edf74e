//! Sample buffers and the shared signal-processing primitives.

mod delay;
mod fft;
mod noise;
mod resample;

pub use delay::{fractional_delay, DelayKernel, Delayed};
pub use fft::{fft_correlate, FftCorrelator};
pub use noise::{add_awgn, noise_power_dbw_for_cn0};
pub use resample::{rational_ratio, resample, RationalRatio, Resampler};

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Uniformly sampled complex I/Q series.
///
/// `if_offset_hz` records where the carrier sits relative to complex
/// baseband; 0 means the buffer is baseband.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBuffer {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
    if_offset_hz: f64,
    epoch_s: f64,
}

impl SignalBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        Self::with_metadata(samples, sample_rate_hz, 0.0, 0.0)
    }

    pub fn with_metadata(
        samples: Vec<Complex64>,
        sample_rate_hz: f64,
        if_offset_hz: f64,
        epoch_s: f64,
    ) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(invalid(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if !if_offset_hz.is_finite() || !epoch_s.is_finite() {
            return Err(invalid("IF offset and epoch must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            if_offset_hz,
            epoch_s,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn if_offset_hz(&self) -> f64 {
        self.if_offset_hz
    }

    pub fn epoch_s(&self) -> f64 {
        self.epoch_s
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of |x|².
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Same metadata, new samples.
    pub(crate) fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            if_offset_hz: self.if_offset_hz,
            epoch_s: self.epoch_s,
        }
    }
}

/// Unit phasor `exp(j·2π·cycles)`, with the phase reduced to one cycle first
/// so large sample indices keep full precision.
#[inline]
pub(crate) fn phasor_cycles(cycles: f64) -> Complex64 {
    let (s, c) = (TAU * (cycles - cycles.floor())).sin_cos();
    Complex64::new(c, s)
}

/// Multiplies every sample by `exp(j(2π·freq·i/f_s + phase))` and shifts the
/// IF annotation by `freq_hz`.
pub fn mix_carrier(buf: &SignalBuffer, freq_hz: f64, phase_rad: f64) -> SignalBuffer {
    let step = freq_hz / buf.sample_rate_hz;
    let phase_cycles = phase_rad / TAU;
    let samples = buf
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| x * phasor_cycles(step * i as f64 + phase_cycles))
        .collect();
    SignalBuffer {
        samples,
        sample_rate_hz: buf.sample_rate_hz,
        if_offset_hz: buf.if_offset_hz + freq_hz,
        epoch_s: buf.epoch_s,
    }
}
