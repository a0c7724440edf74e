use num_complex::Complex64;

use super::PathSeries;
use crate::error::{invalid, Error, Result};

/// Evaluates a path's coefficient and delay at signal-rate sample indices by
/// linear interpolation between channel snapshots. Past the last snapshot
/// the final value is held.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientInterpolator<'a> {
    coefficients: &'a [Complex64],
    delays_s: &'a [f64],
    /// Snapshots per output sample.
    step: f64,
}

impl<'a> CoefficientInterpolator<'a> {
    pub fn new(path: &'a PathSeries, update_rate_hz: f64, target_rate_hz: f64) -> Result<Self> {
        if !(update_rate_hz.is_finite() && update_rate_hz > 0.0) {
            return Err(invalid("channel update rate must be positive"));
        }
        if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
            return Err(invalid("target rate must be positive"));
        }
        Ok(Self {
            coefficients: path.coefficients(),
            delays_s: path.delays_s(),
            step: update_rate_hz / target_rate_hz,
        })
    }

    #[inline]
    fn locate(&self, i: usize) -> (usize, f64) {
        let pos = i as f64 * self.step;
        let last = self.coefficients.len() - 1;
        let t = pos.floor() as usize;
        if t >= last {
            (last, 0.0)
        } else {
            (t, pos - t as f64)
        }
    }

    #[inline]
    pub fn coefficient(&self, i: usize) -> Complex64 {
        let (t, w) = self.locate(i);
        if w == 0.0 {
            return self.coefficients[t];
        }
        self.coefficients[t] * (1.0 - w) + self.coefficients[t + 1] * w
    }

    #[inline]
    pub fn delay_s(&self, i: usize) -> f64 {
        let (t, w) = self.locate(i);
        if w == 0.0 {
            return self.delays_s[t];
        }
        self.delays_s[t] * (1.0 - w) + self.delays_s[t + 1] * w
    }
}

/// Coefficient series upsampled to `n_samples` samples at `target_rate_hz`.
///
/// Asking for more than one snapshot's worth of samples beyond the series
/// is an error.
pub fn resample_coefficients(
    path: &PathSeries,
    update_rate_hz: f64,
    target_rate_hz: f64,
    n_samples: usize,
) -> Result<Vec<Complex64>> {
    let interp = CoefficientInterpolator::new(path, update_rate_hz, target_rate_hz)?;
    let limit = (path.len() + 1) as f64 * target_rate_hz / update_rate_hz;
    if n_samples as f64 > limit + 1e-9 * limit {
        return Err(Error::OutOfRange(format!(
            "{n_samples} samples requested but the channel covers {limit:.0}"
        )));
    }
    Ok((0..n_samples).map(|i| interp.coefficient(i)).collect())
}
