use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SignalBuffer;

/// Adds circularly symmetric complex Gaussian noise of total power
/// `noise_power_dbw` (split equally between I and Q). `-inf` turns noise off.
pub fn add_awgn(buf: &SignalBuffer, noise_power_dbw: f64, seed: u64) -> SignalBuffer {
    if noise_power_dbw == f64::NEG_INFINITY {
        return buf.clone();
    }
    let sigma = (10f64.powf(noise_power_dbw / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples = buf
        .samples()
        .iter()
        .map(|&x| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            x + Complex64::new(re, im) * sigma
        })
        .collect();
    buf.with_samples(samples)
}

/// Noise power (dBW over the full sample bandwidth) that puts a carrier of
/// `carrier_power_w` at `cn0_dbhz`.
pub fn noise_power_dbw_for_cn0(carrier_power_w: f64, cn0_dbhz: f64, sample_rate_hz: f64) -> f64 {
    10.0 * (carrier_power_w * sample_rate_hz).log10() - cn0_dbhz
}
