//! Reference scenes used by the acceptance run: constant-gain satellites
//! with known delays and Dopplers, and static gNBs.

use std::f64::consts::TAU;

use num_complex::Complex64;
use synthrf_core::cdma::{CdmaGenConfig, SATELLITE_SAMPLE_RATE_HZ};
use synthrf_core::channel::{ChannelSet, PathSeries, SourceChannel, SourceKind};

pub const UPDATE_RATE_HZ: f64 = 40e3;
/// Propagation delay shared by the reference satellites.
pub const BASE_DELAY_S: f64 = 0.070;
pub const EXTRA_DELAYS_US: [f64; 4] = [0.0, 2.0, 5.0, 9.0];
pub const DOPPLERS_HZ: [f64; 4] = [-3000.0, -1000.0, 1500.0, 4000.0];
pub const PRNS: [u8; 4] = [1, 14, 19, 21];

/// Constant-magnitude path rotating at `doppler_hz`.
pub fn rotating_path(doppler_hz: f64, delay_s: f64, power: f64, snapshots: usize) -> PathSeries {
    let a = power.sqrt();
    let h = (0..snapshots)
        .map(|t| Complex64::from_polar(a, TAU * doppler_hz * t as f64 / UPDATE_RATE_HZ))
        .collect();
    PathSeries::new(h, vec![delay_s; snapshots]).expect("equal lengths")
}

/// The four reference LOS satellites as a Table II satellite config plus
/// channels.
pub fn los_scene(dopplers: [f64; 4], duration_s: f64) -> (CdmaGenConfig, ChannelSet) {
    let n = (duration_s * UPDATE_RATE_HZ).round() as usize;
    let mut cfg = CdmaGenConfig::satellite(duration_s);
    cfg.data_seed = 1;
    let mut sources = Vec::new();
    for i in 0..4 {
        let id = format!("prn{:02}", PRNS[i]);
        let delay = BASE_DELAY_S + EXTRA_DELAYS_US[i] * 1e-6;
        let path = rotating_path(dopplers[i], delay, 1.0, n);
        sources.push(SourceChannel::new(id.clone(), SourceKind::Satellite, true, vec![path]).expect("valid id"));
        cfg = cfg.with_source(id, PRNS[i]);
    }
    let set = ChannelSet::new(sources, UPDATE_RATE_HZ, duration_s).expect("consistent lengths");
    (cfg, set)
}

/// Code phase, in samples, at which reference satellite `i` should appear.
pub fn expected_code_phase(i: usize) -> f64 {
    (EXTRA_DELAYS_US[i] * 1e-6 * SATELLITE_SAMPLE_RATE_HZ).round()
}

/// Unit-gain single-path gNBs at the given delays.
pub fn static_gnbs(ids: &[(&str, f64)], duration_s: f64) -> ChannelSet {
    let n = (duration_s * UPDATE_RATE_HZ).round() as usize;
    let sources = ids
        .iter()
        .map(|(id, d)| {
            let p = PathSeries::constant(Complex64::new(1.0, 0.0), *d, n).expect("valid delay");
            SourceChannel::new(*id, SourceKind::Gnb, true, vec![p]).expect("valid id")
        })
        .collect();
    ChannelSet::new(sources, UPDATE_RATE_HZ, duration_s).expect("consistent lengths")
}
