use num_complex::Complex64;
use rustfft::FftPlanner;
use synthrf_core::dsp::{resample, SignalBuffer};

fn tone(f: f64, fs: f64, n: usize) -> SignalBuffer {
    let x = (0..n)
        .map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * f * i as f64 / fs))
        .collect();
    SignalBuffer::new(x, fs).unwrap()
}

fn spectrum(x: &[Complex64]) -> Vec<Complex64> {
    let mut v = x.to_vec();
    FftPlanner::new().plan_fft_forward(v.len()).process(&mut v);
    v.iter().map(|c| c / x.len() as f64).collect()
}

#[test]
fn passband_tone_keeps_frequency_and_level() {
    let out = resample(&tone(100e3, 1.023e6, 10_230), 38.192e6).unwrap();
    assert_eq!(out.len(), 381_920);
    // 1 ms of output holds exactly 100 cycles
    let seg = &out.samples()[150_000..150_000 + 38_192];
    let s = spectrum(seg);
    let peak = (0..s.len()).max_by(|&a, &b| s[a].norm().total_cmp(&s[b].norm())).unwrap();
    assert_eq!(peak, 100);
    let level_db = 20.0 * s[100].norm().log10();
    assert!(level_db.abs() <= 0.1, "{level_db} dB");
}

#[test]
fn stopband_tones_suppressed() {
    // 8.184 MHz → 1.023 MHz: anything above 511.5 kHz must vanish.
    let fs_in = 8.184e6;
    for f in [520e3, 600e3, 1.2e6, 2.5e6, -3.7e6] {
        let out = resample(&tone(f, fs_in, 81_840), 1.023e6).unwrap();
        let mid = &out.samples()[2000..out.len() - 2000];
        let p = mid.iter().map(|v| v.norm_sqr()).sum::<f64>() / mid.len() as f64;
        let db = 10.0 * p.log10();
        assert!(db <= -60.0, "{f} Hz leaks at {db} dB");
    }
}

#[test]
fn white_noise_above_new_nyquist_suppressed() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let fs_in = 8.184e6;
    let n = 1 << 17;
    let mut x: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    // remove everything below 0.55 MHz so only out-of-band content remains
    let mut plan = FftPlanner::new();
    plan.plan_fft_forward(n).process(&mut x);
    for (k, v) in x.iter_mut().enumerate() {
        let f = if k < n / 2 { k } else { n - k } as f64 * fs_in / n as f64;
        if f < 0.55e6 {
            *v = Complex64::default();
        }
    }
    plan.plan_fft_inverse(n).process(&mut x);
    x.iter_mut().for_each(|v| *v /= n as f64);
    let buf = SignalBuffer::new(x, fs_in).unwrap();
    let out = resample(&buf, 1.023e6).unwrap();
    let mid = &out.samples()[2000..out.len() - 2000];
    let p_out = mid.iter().map(|v| v.norm_sqr()).sum::<f64>() / mid.len() as f64;
    let db = 10.0 * (p_out / buf.mean_power()).log10();
    assert!(db <= -60.0, "{db} dB");
}

#[test]
fn round_trip_preserves_bandlimited_signal() {
    let fs = 1.023e6;
    let n = 20_460;
    let x: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            [(37e3, 0.7), (-151e3, 0.5), (180e3, 0.3)]
                .iter()
                .map(|&(f, a)| Complex64::from_polar(a, std::f64::consts::TAU * f * t))
                .sum()
        })
        .collect();
    let buf = SignalBuffer::new(x, fs).unwrap();
    let back = resample(&resample(&buf, 38.192e6).unwrap(), fs).unwrap();
    assert_eq!(back.len(), n);
    let edge = 500;
    let (mut sig, mut err) = (0.0, 0.0);
    for (a, b) in buf.samples()[edge..n - edge].iter().zip(&back.samples()[edge..n - edge]) {
        sig += a.norm_sqr();
        err += (a - b).norm_sqr();
    }
    let snr = 10.0 * (sig / err).log10();
    assert!(snr >= 50.0, "{snr} dB");
}
