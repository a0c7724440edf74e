use num_complex::Complex64;
use proptest::prelude::*;
use synthrf_core::channel::{
    doppler_spectrum, generate_synthetic_channel, resample_coefficients, ChannelSpec, PathSeries,
    PathSpec, SourceKind, SourceSpec,
};

fn one_source(paths: Vec<PathSpec>, los: bool, duration_s: f64, seed: u64) -> ChannelSpec {
    ChannelSpec {
        update_rate_hz: 40e3,
        duration_s,
        seed,
        sinusoids: 64,
        sources: vec![SourceSpec {
            id: "s".into(),
            kind: SourceKind::Satellite,
            los,
            paths,
        }],
    }
}

/// One-sample Kolmogorov–Smirnov statistic against F(r) = 1 − exp(−r²).
fn ks_rayleigh(envelope: &[f64]) -> f64 {
    let mut r = envelope.to_vec();
    r.sort_by(f64::total_cmp);
    let n = r.len() as f64;
    r.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x * x).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn rayleigh_envelope_passes_ks() {
    // KS assumes independent draws, so the fading must decorrelate within a
    // few snapshots.
    for seed in [1, 2, 3] {
        let mut p = PathSpec::fixed(0.0);
        p.fading_spread_hz = 10e3;
        let set = generate_synthetic_channel(&one_source(vec![p], false, 2.5, seed)).unwrap();
        let h = set.sources()[0].paths()[0].coefficients();
        assert_eq!(h.len(), 100_000);
        let env: Vec<f64> = h.iter().map(|x| x.norm()).collect();
        let d = ks_rayleigh(&env);
        let critical = 1.628 / (env.len() as f64).sqrt(); // α = 0.01
        assert!(d < critical, "seed {seed}: D = {d} ≥ {critical}");
    }
}

#[test]
fn mean_power_matches_configuration() {
    let mut los = PathSpec::fixed(1e-6);
    los.k_factor_db = Some(6.0);
    los.doppler_hz = -3000.0;
    los.fading_spread_hz = 1000.0;
    let mut nlos = PathSpec::fixed(2e-6);
    nlos.power_db = Some(-10.0);
    nlos.fading_spread_hz = 1000.0;
    let mut nlos2 = PathSpec::fixed(3e-6);
    nlos2.power = Some(0.25);
    nlos2.doppler_hz = 400.0;
    nlos2.fading_spread_hz = 1000.0;
    let expected = [1.0, 0.1, 0.25];
    for seed in 0..5 {
        let spec = one_source(vec![los.clone(), nlos.clone(), nlos2.clone()], true, 2.5, seed);
        let set = generate_synthetic_channel(&spec).unwrap();
        for (p, want) in set.sources()[0].paths().iter().zip(expected) {
            let got = p.mean_power();
            assert!((got / want - 1.0).abs() < 0.05, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn interpolated_tone_error_small() {
    let f_ch = 40e3;
    let fs = 38.192e6;
    let n_snap = 400; // 10 ms
    let tone = |t: f64| Complex64::from_polar(1.0, std::f64::consts::TAU * 1e3 * t);
    let path = PathSeries::new(
        (0..n_snap).map(|t| tone(t as f64 / f_ch)).collect(),
        vec![0.0; n_snap],
    )
    .unwrap();
    let n = ((n_snap - 1) as f64 / f_ch * fs) as usize;
    let h = resample_coefficients(&path, f_ch, fs, n).unwrap();
    let err: f64 = h
        .iter()
        .enumerate()
        .map(|(i, x)| (x - tone(i as f64 / fs)).norm_sqr())
        .sum::<f64>()
        / n as f64;
    assert!(err.sqrt() < 0.005, "rms error {}", err.sqrt());
    assert_eq!(h[0], path.coefficients()[0]);
}

#[test]
fn linear_series_reproduced_exactly() {
    let path = PathSeries::new(
        (0..50).map(|t| Complex64::new(0.5 * t as f64, 0.0)).collect(),
        vec![0.0; 50],
    )
    .unwrap();
    let h = resample_coefficients(&path, 1e3, 8e3, 393).unwrap();
    for (i, x) in h.iter().enumerate() {
        assert!((x.re - 0.5 * i as f64 / 8.0).abs() < 1e-12);
    }
    assert_eq!(h[49 * 8], path.coefficients()[49]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn los_spectrum_peak_tracks_doppler(fd in -5000.0f64..5000.0, k_db in 5.0f64..20.0, seed in 0u64..1000) {
        let mut p = PathSpec::fixed(0.0);
        p.doppler_hz = fd;
        p.k_factor_db = Some(k_db);
        let set = generate_synthetic_channel(&one_source(vec![p], true, 0.05, seed)).unwrap();
        let spec = doppler_spectrum(&set.sources()[0], 40e3, 1024).unwrap();
        let (peak, _) = spec.peak();
        prop_assert!((peak - fd).abs() <= 40e3 / 1024.0, "peak {} for {}", peak, fd);
    }
}
