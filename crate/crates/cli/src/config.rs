//! TOML run configurations.
//!
//! Every file may carry `version = 1`. CDMA configs may name
//! `preset = "satellite" | "haps"` to take the rates and IF from the presets;
//! `duration_s`, `data_seed` and `sources` must still be given (or the seed
//! supplied with `--seed`).

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use synthrf_core::cdma::CdmaGenConfig;
use synthrf_core::channel::ChannelSpec;
use synthrf_core::prs::PrsGenConfig;
use synthrf_core::receiver::{AcquisitionConfig, TrackingConfig};

use crate::CliError;

pub const CONFIG_VERSION: i64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub acquisition: AcquisitionConfig,
    pub tracking: TrackingConfig,
}

fn config_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", path.display()))
}

pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(path, e))?;
    let mut table: toml::Table = text.parse().map_err(|e| config_err(path, e))?;
    match table.remove("version") {
        None => {}
        Some(toml::Value::Integer(CONFIG_VERSION)) => {}
        Some(v) => return Err(config_err(path, format!("unsupported config version {v}"))),
    }
    Ok(table)
}

fn decode<T: DeserializeOwned>(path: &Path, table: toml::Table) -> Result<T, CliError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(path, e.message()))
}

fn seed_value(path: &Path, seed: u64) -> Result<toml::Value, CliError> {
    i64::try_from(seed)
        .map(toml::Value::Integer)
        .map_err(|_| config_err(path, format!("seed {seed} exceeds the TOML integer range")))
}

fn validated<T>(path: &Path, value: T, check: impl FnOnce(&T) -> synthrf_core::Result<()>) -> Result<T, CliError> {
    check(&value).map_err(|e| config_err(path, e))?;
    Ok(value)
}

/// `--seed` replaces the `seed` key.
pub fn load_channel_spec(path: &Path, seed: Option<u64>) -> Result<ChannelSpec, CliError> {
    let mut t = read_table(path)?;
    if let Some(s) = seed {
        t.insert("seed".into(), seed_value(path, s)?);
    }
    decode(path, t)
}

/// `--seed s` sets `data_seed = s` and `noise_seed = s + 1`.
pub fn load_cdma_config(path: &Path, seed: Option<u64>) -> Result<CdmaGenConfig, CliError> {
    let mut user = read_table(path)?;
    let mut t = match user.remove("preset") {
        None => toml::Table::new(),
        Some(toml::Value::String(name)) => {
            let preset = match name.as_str() {
                "satellite" => CdmaGenConfig::satellite(0.0),
                "haps" => CdmaGenConfig::haps(0.0),
                other => return Err(config_err(path, format!("unknown preset '{other}'"))),
            };
            let mut base = toml::Table::try_from(&preset).map_err(|e| config_err(path, e))?;
            for k in ["duration_s", "data_seed", "noise_seed", "sources"] {
                base.remove(k);
            }
            base
        }
        Some(v) => return Err(config_err(path, format!("preset must be a string, found {v}"))),
    };
    t.extend(user);
    if let Some(s) = seed {
        t.insert("data_seed".into(), seed_value(path, s)?);
        t.insert("noise_seed".into(), seed_value(path, s.wrapping_add(1))?);
    }
    let cfg: CdmaGenConfig = decode(path, t)?;
    if cfg.sources.is_empty() {
        return Err(config_err(path, "no sources configured"));
    }
    validated(path, cfg, CdmaGenConfig::validate)
}

/// `--seed` replaces `noise_seed`.
pub fn load_prs_config(path: &Path, seed: Option<u64>) -> Result<PrsGenConfig, CliError> {
    let mut t = read_table(path)?;
    if let Some(s) = seed {
        t.insert("noise_seed".into(), seed_value(path, s)?);
    }
    let cfg: PrsGenConfig = decode(path, t)?;
    if cfg.gnbs.is_empty() {
        return Err(config_err(path, "no gNBs configured"));
    }
    validated(path, cfg, PrsGenConfig::validate)
}

pub fn load_receiver_config(path: Option<&Path>) -> Result<ReceiverConfig, CliError> {
    let Some(path) = path else {
        return Ok(ReceiverConfig::default());
    };
    let cfg: ReceiverConfig = decode(path, read_table(path)?)?;
    validated(path, cfg, |c| {
        c.acquisition.validate()?;
        c.tracking.validate()
    })
}
