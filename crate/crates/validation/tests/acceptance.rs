//! End-to-end acceptance checks, one line per criterion.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthrf::core::cdma::{self, CdmaGenConfig};
use synthrf::core::channel::{
    doppler_spectrum, generate_synthetic_channel, ChannelSpec, PathSpec, SourceChannel, SourceKind, SourceSpec,
};
use synthrf::core::prn::{generate_ca_code, CODE_LENGTH};
use synthrf::core::prs::{
    ofdm_demodulate, ofdm_modulate, prs_replica, prs_time_of_arrival, synthesize_gnb_with_reference,
    CarrierConfig, CellLabel, PrsGenConfig, ResourceGrid, SYMBOLS_PER_SLOT,
};
use synthrf::core::receiver::{acquire, track, AcquisitionConfig, TrackingConfig};
use synthrf::commands;
use synthrf::iq::{SampleFormat, WaveformKind};
use synthrf_validation::{
    expected_code_phase, los_scene, rotating_path, static_gnbs, BASE_DELAY_S, DOPPLERS_HZ, EXTRA_DELAYS_US, PRNS,
    UPDATE_RATE_HZ,
};

const NLOS_PRN: u8 = 30;

const CODE_TOL_SAMPLES: f64 = 19.0;
const C1_RUNTIME_S: f64 = 60.0;
const COARSE_TOL_HZ: f64 = 250.0;
const FINE_TOL_HZ: f64 = 25.0;
const C3_TRIALS: u64 = 100;
const C3_NLOS_REJECT_MIN: usize = 95;
const C3_CN0_DBHZ: f64 = 45.0;
const C3_NLOS_POWER_DB: f64 = -30.0;
const C4_DURATION_S: f64 = 0.4;
const C4_DOPPLER_TOL_HZ: f64 = 10.0;
const C4_DRIFT_TOL_CHIPS: f64 = 0.1;
const C4_SIGMA_MAX_HZ: f64 = 30.0;
const C6_REL_ERR: f64 = 1e-6;
const C8_RUNTIME_S: f64 = 10.0;

type Outcome = Result<String, String>;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (cfg, channels) = los_scene([0.0; 4], 0.1);
    let rx = cdma::synthesize(&cfg, &channels).map_err(|e| e.to_string())?;
    let acq = AcquisitionConfig::default();
    let mut report = Vec::new();
    let mut ok = true;
    for (i, &prn) in PRNS.iter().enumerate() {
        let r = acquire(&rx, &generate_ca_code(prn).unwrap(), &acq).map_err(|e| e.to_string())?;
        let err = r.code_phase_samples as f64 - expected_code_phase(i);
        ok &= r.acquired && err.abs() <= CODE_TOL_SAMPLES;
        report.push(format!("PRN{prn} {}/{}", r.code_phase_samples, expected_code_phase(i)));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < C1_RUNTIME_S;
    let detail = format!("code phase got/expected {}; {elapsed:.1} s", report.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let (cfg, channels) = los_scene(DOPPLERS_HZ, 0.1);
    let rx = cdma::synthesize(&cfg, &channels).map_err(|e| e.to_string())?;
    let acq = AcquisitionConfig::default();
    let mut report = Vec::new();
    let mut ok = true;
    for (i, &prn) in PRNS.iter().enumerate() {
        let r = acquire(&rx, &generate_ca_code(prn).unwrap(), &acq).map_err(|e| e.to_string())?;
        let coarse = r.coarse_freq_hz - DOPPLERS_HZ[i];
        let fine = r.fine_freq_hz.map(|f| f - DOPPLERS_HZ[i]);
        ok &= r.acquired && coarse.abs() <= COARSE_TOL_HZ && fine.is_some_and(|f| f.abs() <= FINE_TOL_HZ);
        report.push(format!(
            "PRN{prn} coarse {coarse:+.0} fine {}",
            fine.map_or("none".into(), |f| format!("{f:+.2}"))
        ));
    }
    let detail = format!("errors in Hz: {}", report.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gate_trial(seed: u64) -> Result<([bool; 4], bool), String> {
    let duration = 0.012;
    let mut sources: Vec<SourceSpec> = (0..4)
        .map(|i| SourceSpec {
            id: format!("prn{:02}", PRNS[i]),
            kind: SourceKind::Satellite,
            los: true,
            paths: vec![PathSpec {
                doppler_hz: DOPPLERS_HZ[i],
                ..PathSpec::fixed(BASE_DELAY_S + EXTRA_DELAYS_US[i] * 1e-6)
            }],
        })
        .collect();
    sources.push(SourceSpec {
        id: "nlos".into(),
        kind: SourceKind::Satellite,
        los: false,
        paths: vec![PathSpec {
            power_db: Some(C3_NLOS_POWER_DB),
            doppler_hz: 2500.0,
            ..PathSpec::fixed(BASE_DELAY_S + 12e-6)
        }],
    });
    let channels = generate_synthetic_channel(&ChannelSpec {
        update_rate_hz: UPDATE_RATE_HZ,
        duration_s: duration,
        seed,
        sinusoids: 64,
        sources,
    })
    .map_err(|e| e.to_string())?;
    let mut cfg = CdmaGenConfig::satellite(duration);
    cfg.data_seed = seed;
    cfg.noise_seed = 1000 + seed;
    cfg.cn0_dbhz = Some(C3_CN0_DBHZ);
    for prn in PRNS {
        cfg = cfg.with_source(format!("prn{prn:02}"), prn);
    }
    cfg = cfg.with_source("nlos", NLOS_PRN);
    let rx = cdma::synthesize(&cfg, &channels).map_err(|e| e.to_string())?;
    let acq = AcquisitionConfig::default();
    let mut los = [false; 4];
    for (i, &prn) in PRNS.iter().enumerate() {
        los[i] = acquire(&rx, &generate_ca_code(prn).unwrap(), &acq)
            .map_err(|e| e.to_string())?
            .acquired;
    }
    let nlos = acquire(&rx, &generate_ca_code(NLOS_PRN).unwrap(), &acq)
        .map_err(|e| e.to_string())?
        .acquired;
    Ok((los, nlos))
}

fn criterion_3() -> Outcome {
    let mut per_source = [0usize; 4];
    let mut all_los = 0usize;
    let mut nlos_rejected = 0usize;
    for seed in 0..C3_TRIALS {
        let (los, nlos) = gate_trial(seed)?;
        for (count, pass) in per_source.iter_mut().zip(los) {
            *count += usize::from(pass);
        }
        all_los += usize::from(los.iter().all(|&x| x));
        nlos_rejected += usize::from(!nlos);
    }
    let nlos_ok = nlos_rejected >= C3_NLOS_REJECT_MIN;
    let los_ok = all_los as u64 == C3_TRIALS;
    let detail = format!(
        "NLOS rejected {nlos_rejected}/{C3_TRIALS} ({}); all four LOS passed in {all_los}/{C3_TRIALS} trials, per PRN {per_source:?} ({})",
        if nlos_ok { "ok" } else { "short" },
        if los_ok { "ok" } else { "short" },
    );
    if nlos_ok && los_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn criterion_4() -> Outcome {
    let (mut cfg, channels) = los_scene(DOPPLERS_HZ, C4_DURATION_S);
    cfg.cn0_dbhz = Some(C3_CN0_DBHZ);
    cfg.noise_seed = 4;
    let rx = cdma::synthesize(&cfg, &channels).map_err(|e| e.to_string())?;
    let acq = AcquisitionConfig::default();
    let trk = TrackingConfig::default();
    let chip = cfg.f_s_hz / cfg.r_c_hz;
    let mut report = Vec::new();
    let mut ok = true;
    let mut tracked = 0;
    for (i, &prn) in PRNS.iter().enumerate() {
        let code = generate_ca_code(prn).unwrap();
        let a = acquire(&rx, &code, &acq).map_err(|e| e.to_string())?;
        if !a.acquired {
            report.push(format!("PRN{prn} not acquired"));
            continue;
        }
        tracked += 1;
        let t = track(&rx, &code, &a, &trk).map_err(|e| e.to_string())?;
        let dopp: Vec<f64> = t.records.iter().map(|r| r.doppler_hz).collect();
        let delay: Vec<f64> = t.records.iter().map(|r| r.code_delay_samples).collect();
        let n = dopp.len();
        let tail = &dopp[n - 100..];
        let m = mean(tail);
        let sigma = (tail.iter().map(|d| (d - m).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
        // after the 50 ms pull-in
        let drift = (mean(&delay[n - 100..]) - mean(&delay[50..150])).abs() / chip;
        let this = (m - DOPPLERS_HZ[i]).abs() <= C4_DOPPLER_TOL_HZ
            && drift < C4_DRIFT_TOL_CHIPS
            && sigma > 0.0
            && sigma <= C4_SIGMA_MAX_HZ
            && !t.lost_lock;
        ok &= this;
        report.push(format!(
            "PRN{prn} mean err {:+.2} Hz, drift {drift:.3} chip, sigma {sigma:.2} Hz",
            m - DOPPLERS_HZ[i]
        ));
    }
    ok &= tracked > 0;
    let detail = report.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let carrier = CarrierConfig::default();
    let fs = carrier.sample_rate_hz();
    let frame: usize = (0..carrier.slots_per_frame()).map(|s| carrier.samples_per_slot(s)).sum();
    let cfg = PrsGenConfig::staggered(0.010, &["g1", "g2"]);
    let rx = synthesize_gnb_with_reference(&cfg, &static_gnbs(&[("g1", 0.0), ("g2", 1e-6)], 0.010), 0.0)
        .map_err(|e| e.to_string())?;
    let detail = format!("f_s {fs} Hz, frame {frame} samples, synthesized {}", rx.len());
    if fs == 15.36e6 && rx.sample_rate_hz() == 15.36e6 && frame == 153_600 && rx.len() == 153_600 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let carrier = CarrierConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grids: Vec<ResourceGrid> = (0..10)
        .map(|_| {
            let mut g = ResourceGrid::for_carrier(&carrier);
            for l in 0..SYMBOLS_PER_SLOT {
                for k in 0..g.subcarriers() {
                    let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    g.set(k, l, v, CellLabel::Pdsch);
                }
            }
            g
        })
        .collect();
    let tx = ofdm_modulate(&grids, &carrier, 0).map_err(|e| e.to_string())?;
    let back = ofdm_demodulate(&tx, &carrier, 0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (a, b) in grids.iter().zip(&back) {
        for l in 0..SYMBOLS_PER_SLOT {
            for k in 0..a.subcarriers() {
                worst = worst.max((a.get(k, l) - b.get(k, l)).norm() / a.get(k, l).norm());
            }
        }
    }
    let fs = carrier.sample_rate_hz();
    let mut toa = Vec::new();
    let mut toa_ok = true;
    for d in [0.0, 12.4, 100.0, 250.6] {
        let cfg = PrsGenConfig::staggered(0.002, &["g"]);
        let rx = synthesize_gnb_with_reference(&cfg, &static_gnbs(&[("g", d / fs)], 0.002), 0.0)
            .map_err(|e| e.to_string())?;
        let replica = prs_replica(&cfg.carrier, &cfg.gnbs[0].prs, 0, rx.len()).map_err(|e| e.to_string())?;
        let est = prs_time_of_arrival(&rx, &replica).map_err(|e| e.to_string())?;
        toa_ok &= est.lag_samples as f64 == f64::round(d);
        toa.push(format!("{d}->{}", est.lag_samples));
    }
    let detail = format!(
        "round trip max relative error {worst:.2e}; ToA delay->peak {}",
        toa.join(", ")
    );
    if worst < C6_REL_ERR && toa_ok && back.len() == grids.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let n = 1024;
    let path = rotating_path(2500.0, 0.0, 1.0, 4000);
    let src = SourceChannel::new("s", SourceKind::Satellite, true, vec![path]).unwrap();
    let spec = doppler_spectrum(&src, UPDATE_RATE_HZ, n).map_err(|e| e.to_string())?;
    let bin = UPDATE_RATE_HZ / n as f64;
    let (pf, _) = spec.peak();
    let lo = spec.freq_hz[0];
    let hi = *spec.freq_hz.last().unwrap();
    let detail = format!("peak {pf} Hz (bin {bin} Hz), axis {lo}..{hi} Hz");
    if (pf - 2500.0).abs() <= bin && hi == UPDATE_RATE_HZ / 2.0 && lo > -UPDATE_RATE_HZ / 2.0 && lo <= -UPDATE_RATE_HZ / 2.0 + bin {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let codes: Vec<Vec<i32>> = (1..=32)
        .map(|p| generate_ca_code(p).unwrap().chips().iter().map(|&c| c as i32).collect())
        .collect();
    let mut ok = true;
    for c in &codes {
        let ones = c.iter().filter(|&&x| x == -1).count();
        ok &= c.len() == CODE_LENGTH && ones == 512 && c.len() - ones == 511;
    }
    let mut values = std::collections::BTreeSet::new();
    for a in 0..32 {
        for b in a + 1..32 {
            for lag in 0..CODE_LENGTH {
                let v: i32 = (0..CODE_LENGTH)
                    .map(|i| codes[a][i] * codes[b][(i + lag) % CODE_LENGTH])
                    .sum();
                values.insert(v);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= values.iter().all(|v| [-65, -1, 63].contains(v)) && elapsed < C8_RUNTIME_S;
    let detail = format!("cross-correlation values {values:?}/1023; {elapsed:.1} s");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/data");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sink = &mut std::io::sink();
    let mut runs = Vec::new();
    for run in 0..2 {
        let ch = dir.path().join(format!("ch{run}.txt"));
        let iq = dir.path().join(format!("rx{run}.f32"));
        let prs = dir.path().join(format!("prs{run}.f32"));
        let err = |e: synthrf::CliError| e.to_string();
        commands::gen_channel(&data.join("scene.toml"), &ch, None, sink).map_err(err)?;
        commands::synthesize(WaveformKind::Cdma, &data.join("cdma.toml"), &ch, &iq, SampleFormat::F32, None, sink)
            .map_err(err)?;
        commands::synthesize(WaveformKind::Prs, &data.join("prs.toml"), &ch, &prs, SampleFormat::F32, None, sink)
            .map_err(err)?;
        let read = |p: &Path| fs::read(p).map_err(|e| e.to_string());
        runs.push((read(&ch)?, read(&iq)?, read(&prs)?));
    }
    let identical = runs[0] == runs[1];
    let bytes = runs[0].1.len() + runs[0].2.len();
    let detail = format!("two runs of the golden configs, {bytes} I/Q bytes, identical: {identical}");
    if identical {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-loop code delay", criterion_1),
        ("closed-loop Doppler", criterion_2),
        ("SNR gate", criterion_3),
        ("tracking consistency", criterion_4),
        ("OFDM sample rate and frame length", criterion_5),
        ("OFDM round trip and PRS ToA", criterion_6),
        ("Doppler spectrum", criterion_7),
        ("C/A code properties", criterion_8),
        ("determinism", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let tag = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|x| tag.contains(x.as_str()) || name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("{tag} {name}: PASS [{secs:.1} s] {d}"),
            Err(d) => {
                failed += 1;
                println!("{tag} {name}: FAIL [{secs:.1} s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
