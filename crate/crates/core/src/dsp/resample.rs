//! Rational-ratio polyphase resampling: upsample by L, Kaiser-windowed sinc
//! low-pass, downsample by M.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SignalBuffer;
use crate::error::{invalid, Error, Result};

const MAX_FACTOR: u64 = 1 << 20;
const RATIO_TOLERANCE: f64 = 1e-9;
const STOPBAND_DB: f64 = 60.0;
/// Cutoff as a fraction of the lower of the two rates.
const CUTOFF_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalRatio {
    pub up: u64,
    pub down: u64,
}

/// Smallest `up/down` (continued-fraction convergent) within 1e-9 relative
/// of `target/source`, with both factors at most 2^20.
pub fn rational_ratio(source_hz: f64, target_hz: f64) -> Result<RationalRatio> {
    for (name, v) in [("source", source_hz), ("target", target_hz)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} rate must be positive, got {v}")));
        }
    }
    let ratio = target_hz / source_hz;
    let unsupported = Error::UnsupportedRatio {
        source_hz,
        target_hz,
    };
    let (mut h_prev, mut h) = (0u64, 1u64);
    let (mut k_prev, mut k) = (1u64, 0u64);
    let mut x = ratio;
    for _ in 0..64 {
        let a = x.floor();
        if a > MAX_FACTOR as f64 {
            return Err(unsupported);
        }
        let a = a as u64;
        let h_next = a.checked_mul(h).and_then(|v| v.checked_add(h_prev));
        let k_next = a.checked_mul(k).and_then(|v| v.checked_add(k_prev));
        let (Some(h_next), Some(k_next)) = (h_next, k_next) else {
            return Err(unsupported);
        };
        if h_next > MAX_FACTOR || k_next > MAX_FACTOR {
            return Err(unsupported);
        }
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
        if h > 0 && ((h as f64 / k as f64) - ratio).abs() <= RATIO_TOLERANCE * ratio {
            return Ok(RationalRatio { up: h, down: k });
        }
        let frac = x - a as f64;
        if frac <= 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    Err(unsupported)
}

/// A designed polyphase resampler between two fixed rates.
#[derive(Debug, Clone)]
pub struct Resampler {
    ratio: RationalRatio,
    source_hz: f64,
    target_hz: f64,
    /// `phases[p][m] = h[p + m·L]`
    phases: Vec<Vec<f64>>,
    /// Group delay of the prototype filter, in upsampled samples.
    delay: u64,
}

impl Resampler {
    pub fn new(source_hz: f64, target_hz: f64) -> Result<Self> {
        let ratio = rational_ratio(source_hz, target_hz)?;
        let up = ratio.up as usize;
        if ratio.up == ratio.down {
            return Ok(Self {
                ratio,
                source_hz,
                target_hz,
                phases: vec![vec![1.0]],
                delay: 0,
            });
        }
        let taps = kaiser_lowpass(ratio, source_hz, target_hz);
        let mut phases = vec![Vec::new(); up];
        for (j, &h) in taps.iter().enumerate() {
            phases[j % up].push(h);
        }
        Ok(Self {
            ratio,
            source_hz,
            target_hz,
            phases,
            delay: (taps.len() as u64 - 1) / 2,
        })
    }

    pub fn ratio(&self) -> RationalRatio {
        self.ratio
    }

    pub fn source_hz(&self) -> f64 {
        self.source_hz
    }

    pub fn target_hz(&self) -> f64 {
        self.target_hz
    }

    /// Prototype filter length.
    pub fn num_taps(&self) -> usize {
        self.phases.iter().map(Vec::len).sum()
    }

    /// Output length for `n_in` input samples: `ceil(n_in·L/M)`.
    pub fn output_len(&self, n_in: usize) -> usize {
        let num = n_in as u64 * self.ratio.up;
        num.div_ceil(self.ratio.down) as usize
    }

    /// Resamples a block; output sample 0 is time-aligned with input sample 0.
    pub fn process(&self, input: &[Complex64]) -> Vec<Complex64> {
        if self.ratio.up == self.ratio.down {
            return input.to_vec();
        }
        let up = self.ratio.up;
        let down = self.ratio.down;
        let n_in = input.len() as u64;
        (0..self.output_len(input.len()) as u64)
            .map(|n| {
                let u = n * down + self.delay;
                let coeffs = &self.phases[(u % up) as usize];
                let base = u / up;
                // input index = base - m, valid while 0 <= base - m < n_in
                let m_lo = if base >= n_in { (base - n_in + 1) as usize } else { 0 };
                let m_hi = coeffs.len().min(base as usize + 1);
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, &h) in coeffs.iter().enumerate().take(m_hi).skip(m_lo) {
                    acc += input[(base - m as u64) as usize] * h;
                }
                acc
            })
            .collect()
    }
}

/// Kaiser-windowed sinc at the upsampled rate, cutoff 0.45·min(rates) and
/// stopband from 0.5·min(rates), DC gain L.
fn kaiser_lowpass(ratio: RationalRatio, source_hz: f64, target_hz: f64) -> Vec<f64> {
    let upsampled_hz = source_hz * ratio.up as f64;
    let low = source_hz.min(target_hz);
    let cutoff = CUTOFF_FRACTION * low / upsampled_hz;
    let transition = 2.0 * (0.5 - CUTOFF_FRACTION) * low / upsampled_hz;
    let beta = 0.1102 * (STOPBAND_DB - 8.7);
    let mut len = ((STOPBAND_DB - 7.95) / (2.285 * 2.0 * PI * transition)).ceil() as usize + 1;
    if len % 2 == 0 {
        len += 1;
    }
    let centre = (len - 1) as f64 / 2.0;
    let i0_beta = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 - centre;
            let x = 2.0 * cutoff * t;
            let sinc = if t == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
            let r = t / centre;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            2.0 * cutoff * sinc * w
        })
        .collect();
    let gain = ratio.up as f64 / taps.iter().sum::<f64>();
    taps.iter_mut().for_each(|h| *h *= gain);
    taps
}

/// Zeroth-order modified Bessel function of the first kind, power series.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Resamples `buf` to `target_rate_hz`; IF annotation and epoch carry over.
pub fn resample(buf: &SignalBuffer, target_rate_hz: f64) -> Result<SignalBuffer> {
    let resampler = Resampler::new(buf.sample_rate_hz(), target_rate_hz)?;
    SignalBuffer::with_metadata(
        resampler.process(buf.samples()),
        target_rate_hz,
        buf.if_offset_hz(),
        buf.epoch_s(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(
            rational_ratio(1.023e6, 38.192e6).unwrap(),
            RationalRatio { up: 112, down: 3 }
        );
        assert_eq!(
            rational_ratio(38.874e6, 38.192e6).unwrap(),
            RationalRatio { up: 56, down: 57 }
        );
        assert_eq!(rational_ratio(5.0, 5.0).unwrap(), RationalRatio { up: 1, down: 1 });
        assert!(matches!(
            rational_ratio(1.0, std::f64::consts::PI * 1e7),
            Err(Error::UnsupportedRatio { .. })
        ));
        assert!(rational_ratio(0.0, 1.0).is_err());
    }

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.8
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-11);
    }

    #[test]
    fn unity_ratio_is_identity() {
        let x: Vec<_> = (0..50).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let buf = SignalBuffer::new(x, 1e6).unwrap();
        assert_eq!(resample(&buf, 1e6).unwrap(), buf);
    }

    #[test]
    fn output_length_is_ceiling() {
        let r = Resampler::new(38.874e6, 38.192e6).unwrap();
        assert_eq!(r.output_len(38874), 38192);
        assert_eq!(r.output_len(1), 1);
    }
}
