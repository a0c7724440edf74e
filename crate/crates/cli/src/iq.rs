//! Interleaved little-endian I/Q files with a JSON sidecar of the same
//! basename.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use synthrf_core::cdma::CdmaGenConfig;
use synthrf_core::dsp::SignalBuffer;
use synthrf_core::prs::PrsGenConfig;

pub const SIDECAR_VERSION: u32 = 1;
const I16_MAX: f64 = 32767.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    F32,
    I16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Cdma,
    Prs,
}

/// Per-source truth at the first sample, relative to the earliest source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTruthRecord {
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prn: Option<u8>,
    pub los: bool,
    pub delay_s: f64,
    pub delay_samples: f64,
    pub doppler_hz: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub version: u32,
    pub kind: WaveformKind,
    pub sample_format: SampleFormat,
    /// Amplitude mapped to ±32767 in i16 files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i16_full_scale: Option<f64>,
    pub sample_rate_hz: f64,
    pub if_hz: f64,
    pub samples: usize,
    pub duration_s: f64,
    pub channel_update_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cdma: Option<CdmaGenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prs: Option<PrsGenConfig>,
    #[serde(default)]
    pub truth: Vec<SourceTruthRecord>,
}

impl Sidecar {
    pub fn truth_for_prn(&self, prn: u8) -> Option<&SourceTruthRecord> {
        self.truth.iter().find(|t| t.prn == Some(prn))
    }
}

pub fn sidecar_path(iq_path: &Path) -> PathBuf {
    iq_path.with_extension("json")
}

fn encode(samples: &[Complex64], format: SampleFormat) -> (Vec<u8>, Option<f64>) {
    match format {
        SampleFormat::F32 => {
            let mut out = Vec::with_capacity(samples.len() * 8);
            for s in samples {
                out.extend_from_slice(&(s.re as f32).to_le_bytes());
                out.extend_from_slice(&(s.im as f32).to_le_bytes());
            }
            (out, None)
        }
        SampleFormat::I16 => {
            let peak = samples
                .iter()
                .map(|s| s.re.abs().max(s.im.abs()))
                .fold(0.0, f64::max);
            let full_scale = if peak > 0.0 { peak } else { 1.0 };
            let q = |x: f64| ((x / full_scale * I16_MAX).round().clamp(-I16_MAX, I16_MAX)) as i16;
            let mut out = Vec::with_capacity(samples.len() * 4);
            for s in samples {
                out.extend_from_slice(&q(s.re).to_le_bytes());
                out.extend_from_slice(&q(s.im).to_le_bytes());
            }
            (out, Some(full_scale))
        }
    }
}

/// Writes samples and sidecar. `sidecar` fields describing the encoding
/// are filled in here.
pub fn write_iq(path: &Path, buf: &SignalBuffer, format: SampleFormat, mut sidecar: Sidecar) -> Result<Sidecar> {
    let meta = sidecar_path(path);
    if meta == path {
        bail!("I/Q file {} would collide with its sidecar", path.display());
    }
    let (bytes, full_scale) = encode(buf.samples(), format);
    sidecar.sample_format = format;
    sidecar.i16_full_scale = full_scale;
    sidecar.samples = buf.len();
    sidecar.sample_rate_hz = buf.sample_rate_hz();
    sidecar.if_hz = buf.if_offset_hz();
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    w.write_all(&bytes)?;
    w.flush()?;
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&meta, json + "\n").with_context(|| format!("writing {}", meta.display()))?;
    Ok(sidecar)
}

pub fn read_sidecar(iq_path: &Path) -> Result<Sidecar> {
    let meta = sidecar_path(iq_path);
    let text = fs::read_to_string(&meta).with_context(|| format!("reading sidecar {}", meta.display()))?;
    let sidecar: Sidecar = serde_json::from_str(&text).with_context(|| format!("parsing {}", meta.display()))?;
    if sidecar.version != SIDECAR_VERSION {
        bail!("unsupported sidecar version {}", sidecar.version);
    }
    Ok(sidecar)
}

pub fn read_iq(path: &Path) -> Result<(SignalBuffer, Sidecar)> {
    let sidecar = read_sidecar(path)?;
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let width = match sidecar.sample_format {
        SampleFormat::F32 => 8,
        SampleFormat::I16 => 4,
    };
    if bytes.len() != sidecar.samples * width {
        bail!(
            "{} holds {} bytes, sidecar promises {} samples of {width} bytes",
            path.display(),
            bytes.len(),
            sidecar.samples
        );
    }
    let samples: Vec<Complex64> = match sidecar.sample_format {
        SampleFormat::F32 => bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[0..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..8].try_into().unwrap());
                Complex64::new(f64::from(re), f64::from(im))
            })
            .collect(),
        SampleFormat::I16 => {
            let scale = sidecar.i16_full_scale.context("i16 sidecar lacks i16_full_scale")? / I16_MAX;
            bytes
                .chunks_exact(4)
                .map(|c| {
                    let re = i16::from_le_bytes([c[0], c[1]]);
                    let im = i16::from_le_bytes([c[2], c[3]]);
                    Complex64::new(f64::from(re) * scale, f64::from(im) * scale)
                })
                .collect()
        }
    };
    let buf = SignalBuffer::with_metadata(samples, sidecar.sample_rate_hz, sidecar.if_hz, 0.0)?;
    Ok((buf, sidecar))
}
