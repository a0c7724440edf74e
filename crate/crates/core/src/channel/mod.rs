//! Per-path channel coefficient and delay series.
//!
//! The layout mirrors what geometry-based channel generators export: for each
//! source `n` and path `k`, a complex coefficient `H[n,k,t]` and a delay
//! `D[n,k,t]` sampled at the channel update rate.

mod generator;
mod interp;
mod spectrum;

pub use generator::{generate_synthetic_channel, ChannelSpec, PathSpec, SourceSpec};
pub use interp::{resample_coefficients, CoefficientInterpolator};
pub use spectrum::{doppler_spectrum, SpectrumResult, DEFAULT_SPECTRUM_NFFT};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Satellite,
    Haps,
    Gnb,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Satellite => "satellite",
            Self::Haps => "haps",
            Self::Gnb => "gnb",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "satellite" => Ok(Self::Satellite),
            "haps" => Ok(Self::Haps),
            "gnb" => Ok(Self::Gnb),
            other => Err(invalid(format!("unknown source kind '{other}'"))),
        }
    }
}

/// Coefficient and delay series of one propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSeries {
    coefficients: Vec<Complex64>,
    delays_s: Vec<f64>,
}

impl PathSeries {
    pub fn new(coefficients: Vec<Complex64>, delays_s: Vec<f64>) -> Result<Self> {
        if coefficients.len() != delays_s.len() {
            return Err(invalid(format!(
                "{} coefficients but {} delays",
                coefficients.len(),
                delays_s.len()
            )));
        }
        if coefficients.is_empty() {
            return Err(invalid("path has no snapshots"));
        }
        if let Some(t) = coefficients.iter().position(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Err(invalid(format!("non-finite coefficient at snapshot {t}")));
        }
        if let Some(t) = delays_s.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(invalid(format!(
                "delay {} at snapshot {t} is negative or non-finite",
                delays_s[t]
            )));
        }
        Ok(Self {
            coefficients,
            delays_s,
        })
    }

    /// Time-invariant path.
    pub fn constant(coefficient: Complex64, delay_s: f64, snapshots: usize) -> Result<Self> {
        Self::new(vec![coefficient; snapshots], vec![delay_s; snapshots])
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn delays_s(&self) -> &[f64] {
        &self.delays_s
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn initial_delay_s(&self) -> f64 {
        self.delays_s[0]
    }

    pub fn mean_power(&self) -> f64 {
        self.coefficients.iter().map(|h| h.norm_sqr()).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceChannel {
    source_id: String,
    kind: SourceKind,
    los: bool,
    paths: Vec<PathSeries>,
}

impl SourceChannel {
    /// Path 0 must be the first-arriving path at snapshot 0.
    pub fn new(
        source_id: impl Into<String>,
        kind: SourceKind,
        los: bool,
        paths: Vec<PathSeries>,
    ) -> Result<Self> {
        let source_id = source_id.into();
        if source_id.is_empty() || source_id.chars().any(char::is_whitespace) {
            return Err(invalid(format!(
                "source id '{source_id}' must be non-empty without whitespace"
            )));
        }
        let Some(first) = paths.first() else {
            return Err(invalid(format!("source {source_id} has no paths")));
        };
        let snapshots = first.len();
        if let Some(k) = paths.iter().position(|p| p.len() != snapshots) {
            return Err(invalid(format!(
                "source {source_id}: path {k} has {} snapshots, path 0 has {snapshots}",
                paths[k].len()
            )));
        }
        let d0 = first.initial_delay_s();
        if let Some(k) = paths.iter().position(|p| p.initial_delay_s() < d0) {
            return Err(invalid(format!(
                "source {source_id}: path {k} arrives before path 0"
            )));
        }
        Ok(Self {
            source_id,
            kind,
            los,
            paths,
        })
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    pub fn los(&self) -> bool {
        self.los
    }

    pub fn paths(&self) -> &[PathSeries] {
        &self.paths
    }

    pub fn snapshots(&self) -> usize {
        self.paths[0].len()
    }

    pub fn initial_delay_s(&self) -> f64 {
        self.paths[0].initial_delay_s()
    }

    /// Σ_k mean|H_k|².
    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(PathSeries::mean_power).sum()
    }

    /// Mean frequency of the first-arriving path, from its phase increments.
    pub fn path0_doppler_hz(&self, update_rate_hz: f64) -> f64 {
        let h = self.paths[0].coefficients();
        if h.len() < 2 {
            return 0.0;
        }
        let sum: Complex64 = h.windows(2).map(|w| w[1] * w[0].conj()).sum();
        sum.arg() * update_rate_hz / std::f64::consts::TAU
    }
}

/// Channels for a set of sources sharing update rate and duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    sources: Vec<SourceChannel>,
    update_rate_hz: f64,
    duration_s: f64,
}

impl ChannelSet {
    pub fn new(sources: Vec<SourceChannel>, update_rate_hz: f64, duration_s: f64) -> Result<Self> {
        if !(update_rate_hz.is_finite() && update_rate_hz > 0.0) {
            return Err(invalid(format!(
                "channel update rate must be positive, got {update_rate_hz}"
            )));
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(invalid(format!("duration must be positive, got {duration_s}")));
        }
        let expected = snapshot_count(update_rate_hz, duration_s);
        for s in &sources {
            if s.snapshots() != expected {
                return Err(invalid(format!(
                    "source {} has {} snapshots, expected {expected}",
                    s.source_id(),
                    s.snapshots()
                )));
            }
        }
        for (i, s) in sources.iter().enumerate() {
            if sources[..i].iter().any(|o| o.source_id == s.source_id) {
                return Err(invalid(format!("duplicate source id {}", s.source_id)));
            }
        }
        Ok(Self {
            sources,
            update_rate_hz,
            duration_s,
        })
    }

    pub fn sources(&self) -> &[SourceChannel] {
        &self.sources
    }

    pub fn source(&self, id: &str) -> Option<&SourceChannel> {
        self.sources.iter().find(|s| s.source_id == id)
    }

    pub fn update_rate_hz(&self) -> f64 {
        self.update_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn snapshots(&self) -> usize {
        snapshot_count(self.update_rate_hz, self.duration_s)
    }

    /// Smallest initial delay over every source and path.
    pub fn min_initial_delay_s(&self) -> Option<f64> {
        self.sources
            .iter()
            .flat_map(|s| s.paths.iter().map(PathSeries::initial_delay_s))
            .reduce(f64::min)
    }

    /// The named sources, in the given order.
    pub fn subset(&self, ids: &[&str]) -> Result<Self> {
        let sources = ids
            .iter()
            .map(|id| {
                self.source(id)
                    .cloned()
                    .ok_or_else(|| invalid(format!("no channel for source {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sources, self.update_rate_hz, self.duration_s)
    }
}

/// S = round(f_ch·T).
pub fn snapshot_count(update_rate_hz: f64, duration_s: f64) -> usize {
    (update_rate_hz * duration_s).round() as usize
}
