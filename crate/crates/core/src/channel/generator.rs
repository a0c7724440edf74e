//! Self-contained stand-in for an external channel generator.
//!
//! Each path gets a mean power, a constant Doppler rotation, a linearly
//! evolving delay and a unit-power fading process: Rician for the direct
//! path of a LOS source, Rayleigh otherwise. Rayleigh fading is a
//! sum-of-sinusoids with separate frequency sets for I and Q (Zheng–Xiao
//! style), so it is deterministic for a seed and needs no filtering.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{snapshot_count, ChannelSet, PathSeries, SourceChannel, SourceKind};
use crate::dsp::phasor_cycles;
use crate::error::{invalid, Result};

/// Fewest oscillators per quadrature the Rayleigh generator accepts.
pub const MIN_SINUSOIDS: usize = 32;

fn default_update_rate() -> f64 {
    40e3
}

fn default_duration() -> f64 {
    0.4
}

fn default_sinusoids() -> usize {
    64
}

fn default_spread() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "default_update_rate")]
    pub update_rate_hz: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub seed: u64,
    /// Oscillators per quadrature in the Rayleigh generator.
    #[serde(default = "default_sinusoids")]
    pub sinusoids: usize,
    pub sources: Vec<SourceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub id: String,
    pub kind: SourceKind,
    pub los: bool,
    pub paths: Vec<PathSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    /// Delay at snapshot 0.
    pub delay_s: f64,
    /// Delay rate of change, seconds per second.
    #[serde(default)]
    pub delay_rate: f64,
    /// Mean linear power. Mutually exclusive with `power_db`.
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub power_db: Option<f64>,
    #[serde(default)]
    pub doppler_hz: f64,
    /// Rician K of the direct path of a LOS source; absent means no
    /// diffuse component at all.
    #[serde(default)]
    pub k_factor_db: Option<f64>,
    /// Maximum Doppler spread of the fading process.
    #[serde(default = "default_spread")]
    pub fading_spread_hz: f64,
}

impl PathSpec {
    /// A static, unit-power path.
    pub fn fixed(delay_s: f64) -> Self {
        Self {
            delay_s,
            delay_rate: 0.0,
            power: None,
            power_db: None,
            doppler_hz: 0.0,
            k_factor_db: None,
            fading_spread_hz: default_spread(),
        }
    }

    pub fn linear_power(&self) -> Result<f64> {
        let p = match (self.power, self.power_db) {
            (Some(_), Some(_)) => return Err(invalid("give either power or power_db, not both")),
            (Some(p), None) => p,
            (None, Some(db)) => 10f64.powf(db / 10.0),
            (None, None) => 1.0,
        };
        if !(p.is_finite() && p >= 0.0) {
            return Err(invalid(format!("path power must be non-negative, got {p}")));
        }
        Ok(p)
    }
}

pub fn generate_synthetic_channel(spec: &ChannelSpec) -> Result<ChannelSet> {
    let f_ch = spec.update_rate_hz;
    if !(f_ch.is_finite() && f_ch > 0.0) {
        return Err(invalid(format!("update rate must be positive, got {f_ch}")));
    }
    if !(spec.duration_s.is_finite() && spec.duration_s > 0.0) {
        return Err(invalid("duration must be positive"));
    }
    if spec.sinusoids < MIN_SINUSOIDS {
        return Err(invalid(format!(
            "need at least {MIN_SINUSOIDS} sinusoids, got {}",
            spec.sinusoids
        )));
    }
    if spec.sources.is_empty() {
        return Err(invalid("channel spec has no sources"));
    }
    let snapshots = snapshot_count(f_ch, spec.duration_s);
    if snapshots == 0 {
        return Err(invalid("duration shorter than one channel snapshot"));
    }

    let sources = spec
        .sources
        .iter()
        .enumerate()
        .map(|(si, src)| {
            if src.paths.is_empty() {
                return Err(invalid(format!("source {} has no paths", src.id)));
            }
            let paths = src
                .paths
                .iter()
                .enumerate()
                .map(|(pi, p)| {
                    let stream = ((si as u64) << 32) | pi as u64;
                    let direct = src.los && pi == 0;
                    generate_path(p, direct, f_ch, snapshots, spec.sinusoids, spec.seed, stream)
                        .map_err(|e| invalid(format!("source {} path {pi}: {e}", src.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            SourceChannel::new(src.id.clone(), src.kind, src.los, paths)
        })
        .collect::<Result<Vec<_>>>()?;
    ChannelSet::new(sources, f_ch, spec.duration_s)
}

fn generate_path(
    p: &PathSpec,
    direct: bool,
    f_ch: f64,
    snapshots: usize,
    sinusoids: usize,
    seed: u64,
    stream: u64,
) -> Result<PathSeries> {
    let power = p.linear_power()?;
    let nyquist = f_ch / 2.0;
    if !(p.doppler_hz.is_finite() && p.doppler_hz.abs() <= nyquist) {
        return Err(invalid(format!(
            "Doppler {} Hz outside ±{nyquist} Hz",
            p.doppler_hz
        )));
    }
    if !(p.fading_spread_hz.is_finite() && (0.0..=nyquist).contains(&p.fading_spread_hz)) {
        return Err(invalid(format!(
            "fading spread {} Hz outside [0, {nyquist}] Hz",
            p.fading_spread_hz
        )));
    }
    if !(p.delay_s.is_finite() && p.delay_s >= 0.0 && p.delay_rate.is_finite()) {
        return Err(invalid(format!("bad delay {} s", p.delay_s)));
    }
    let last_delay = p.delay_s + p.delay_rate * (snapshots - 1) as f64 / f_ch;
    if last_delay < 0.0 {
        return Err(invalid("delay becomes negative within the simulation"));
    }

    // (specular amplitude, diffuse amplitude)
    let (specular, diffuse) = match (direct, p.k_factor_db) {
        (true, None) => (1.0, 0.0),
        (true, Some(k_db)) => {
            let k = 10f64.powf(k_db / 10.0);
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        }
        (false, _) => (0.0, 1.0),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let fading = (diffuse > 0.0).then(|| SumOfSinusoids::new(&mut rng, sinusoids, p.fading_spread_hz / f_ch));

    let amplitude = power.sqrt();
    let coefficients = (0..snapshots)
        .map(|t| {
            let mut g = Complex64::new(specular, 0.0);
            if let Some(f) = &fading {
                g += f.at(t as f64) * diffuse;
            }
            g * amplitude * phasor_cycles(p.doppler_hz * t as f64 / f_ch)
        })
        .collect();
    let delays = (0..snapshots)
        .map(|t| p.delay_s + p.delay_rate * t as f64 / f_ch)
        .collect();
    PathSeries::new(coefficients, delays)
}

/// Unit-power complex Rayleigh process.
struct SumOfSinusoids {
    // cycles per snapshot and phase (rad) for each quadrature
    in_phase: Vec<(f64, f64)>,
    quadrature: Vec<(f64, f64)>,
    scale: f64,
}

impl SumOfSinusoids {
    fn new(rng: &mut ChaCha8Rng, m: usize, spread_per_snapshot: f64) -> Self {
        let theta: f64 = rng.random_range(-PI..PI);
        let mut in_phase = Vec::with_capacity(m);
        let mut quadrature = Vec::with_capacity(m);
        for n in 1..=m {
            let alpha = (TAU * n as f64 - PI + theta) / (4.0 * m as f64);
            in_phase.push((spread_per_snapshot * alpha.cos(), rng.random_range(-PI..PI)));
            quadrature.push((spread_per_snapshot * alpha.sin(), rng.random_range(-PI..PI)));
        }
        Self {
            in_phase,
            quadrature,
            scale: (1.0 / m as f64).sqrt(),
        }
    }

    fn at(&self, t: f64) -> Complex64 {
        let sum = |set: &[(f64, f64)]| -> f64 {
            set.iter()
                .map(|&(f, ph)| {
                    let cyc = f * t;
                    (TAU * (cyc - cyc.floor()) + ph).cos()
                })
                .sum()
        };
        Complex64::new(sum(&self.in_phase), sum(&self.quadrature)) * self.scale
    }
}
