use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Circular cross-correlation `r[k] = Σ_i a[(i+k) mod N]·conj(b[i])`,
/// computed as `IFFT(FFT(a)·conj(FFT(b)))/N`.
///
/// If `a` is `b` circularly delayed by `s` samples the peak lands at `k = s`.
pub fn fft_correlate(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "correlation length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let corr = FftCorrelator::new(b)?;
    let mut out = a.to_vec();
    corr.correlate_in_place(&mut out);
    Ok(out)
}

/// Correlates many inputs against one fixed reference, reusing the
/// transform plans and the reference spectrum.
pub struct FftCorrelator {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    reference_conj: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FftCorrelator {
    pub fn new(reference: &[Complex64]) -> Result<Self> {
        if reference.is_empty() {
            return Err(invalid("empty correlation reference"));
        }
        let n = reference.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut spectrum = reference.to_vec();
        forward.process(&mut spectrum);
        let scale = 1.0 / n as f64;
        let reference_conj = spectrum.iter().map(|x| x.conj() * scale).collect();
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            forward,
            inverse,
            reference_conj,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn len(&self) -> usize {
        self.reference_conj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference_conj.is_empty()
    }

    /// Replaces `signal` with its circular correlation against the reference.
    ///
    /// Panics if `signal.len()` differs from the reference length.
    pub fn correlate_in_place(&self, signal: &mut [Complex64]) {
        assert_eq!(signal.len(), self.len(), "correlator length mismatch");
        let mut scratch = self.scratch.clone();
        self.forward.process_with_scratch(signal, &mut scratch);
        for (x, r) in signal.iter_mut().zip(&self.reference_conj) {
            *x *= r;
        }
        self.inverse.process_with_scratch(signal, &mut scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
        let n = a.len();
        (0..n)
            .map(|k| (0..n).map(|i| a[(i + k) % n] * b[i].conj()).sum())
            .collect()
    }

    fn random(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn impulse_autocorrelation() {
        let mut d = vec![Complex64::new(0.0, 0.0); 16];
        d[0] = Complex64::new(1.0, 0.0);
        let r = fft_correlate(&d, &d).unwrap();
        assert!((r[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(r[1..].iter().all(|x| x.norm() < 1e-15));
    }

    #[test]
    fn shift_moves_peak() {
        let b = random(100, 3);
        let s = 37;
        let a: Vec<_> = (0..100).map(|i| b[(i + 100 - s) % 100]).collect();
        let r = fft_correlate(&a, &b).unwrap();
        let peak = (0..100)
            .max_by(|&x, &y| r[x].norm().total_cmp(&r[y].norm()))
            .unwrap();
        assert_eq!(peak, s);
    }

    #[test]
    fn matches_direct_correlation() {
        let a = random(64, 1);
        let b = random(64, 2);
        let fast = fft_correlate(&a, &b).unwrap();
        let slow = direct(&a, &b);
        let scale = slow.iter().map(|x| x.norm()).fold(0.0, f64::max);
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn parseval_energy() {
        // Σ_k |r[k]|² = (1/N) Σ_f |A(f)|²|B(f)|², spectra by direct DFT.
        let n = 48;
        let a = random(n, 5);
        let b = random(n, 6);
        let dft = |x: &[Complex64], f: usize| -> Complex64 {
            x.iter()
                .enumerate()
                .map(|(t, v)| {
                    let ph = -std::f64::consts::TAU * (f * t % n) as f64 / n as f64;
                    v * Complex64::new(ph.cos(), ph.sin())
                })
                .sum()
        };
        let spectral: f64 = (0..n)
            .map(|f| dft(&a, f).norm_sqr() * dft(&b, f).norm_sqr())
            .sum::<f64>()
            / n as f64;
        let energy: f64 = fft_correlate(&a, &b).unwrap().iter().map(|x| x.norm_sqr()).sum();
        assert!((energy - spectral).abs() <= 1e-9 * spectral);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(fft_correlate(&random(4, 0), &random(5, 0)).is_err());
    }
}
