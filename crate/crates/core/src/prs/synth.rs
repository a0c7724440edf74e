use serde::{Deserialize, Serialize};

use super::{generate_prs_symbols, ofdm_modulate, slot_grid, CarrierConfig, PrsResourceConfig};
use crate::cdma::PathCombiner;
use crate::channel::ChannelSet;
use crate::dsp::{add_awgn, fft_correlate, noise_power_dbw_for_cn0, SignalBuffer};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnbConfig {
    pub source_id: String,
    #[serde(default)]
    pub n_cell_id: u16,
    #[serde(default)]
    pub prs: PrsResourceConfig,
    /// Fill non-PRS symbols with seeded QPSK when set.
    #[serde(default)]
    pub pdsch_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrsGenConfig {
    #[serde(default)]
    pub carrier: CarrierConfig,
    pub duration_s: f64,
    /// Slot index (from frame 0) of the first generated slot.
    #[serde(default)]
    pub first_slot: u64,
    #[serde(default)]
    pub cn0_dbhz: Option<f64>,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub gnbs: Vec<GnbConfig>,
}

impl PrsGenConfig {
    /// Table-default carrier with one gNB per id. Comb offsets are staggered
    /// across gNBs; once the comb is exhausted the slot offset moves on.
    pub fn staggered(duration_s: f64, ids: &[&str]) -> Self {
        let base = PrsResourceConfig::default();
        let gnbs = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let comb = base.comb_size;
                let cell = i as u16;
                GnbConfig {
                    source_id: (*id).to_string(),
                    n_cell_id: cell,
                    prs: PrsResourceConfig {
                        comb_offset: i % comb,
                        resource_offset_slots: ((i / comb) as u32) % base.resource_set_period_slots,
                        n_prs_id: cell,
                        ..base.clone()
                    },
                    pdsch_seed: None,
                }
            })
            .collect();
        Self {
            carrier: CarrierConfig::default(),
            duration_s,
            first_slot: 0,
            cn0_dbhz: None,
            noise_seed: 0,
            gnbs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.carrier.validate()?;
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(invalid("duration must be positive"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.gnbs {
            if !seen.insert(g.source_id.as_str()) {
                return Err(invalid(format!("duplicate source id {}", g.source_id)));
            }
            g.prs.validate(&self.carrier)?;
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.carrier.sample_rate_hz()).round() as usize
    }

    fn carrier_for(&self, g: &GnbConfig) -> CarrierConfig {
        CarrierConfig {
            n_cell_id: g.n_cell_id,
            ..self.carrier.clone()
        }
    }
}

/// Slots needed to cover `n` samples from `first_slot`.
fn slots_covering(carrier: &CarrierConfig, first_slot: u64, n: usize) -> usize {
    let mut total = 0;
    let mut slots = 0;
    while total < n {
        total += carrier.samples_per_slot((first_slot as usize + slots) % carrier.slots_per_frame());
        slots += 1;
    }
    slots
}

fn render(
    carrier: &CarrierConfig,
    prs: &PrsResourceConfig,
    pdsch_seed: Option<u64>,
    first_slot: u64,
    n: usize,
) -> Result<SignalBuffer> {
    let grids = (0..slots_covering(carrier, first_slot, n) as u64)
        .map(|s| slot_grid(carrier, prs, pdsch_seed, first_slot + s))
        .collect::<Result<Vec<_>>>()?;
    let full = ofdm_modulate(&grids, carrier, first_slot)?;
    let mut samples = full.into_samples();
    samples.truncate(n);
    SignalBuffer::new(samples, carrier.sample_rate_hz())
}

/// Baseband PRS-only waveform of one resource, `n` samples long.
pub fn prs_replica(
    carrier: &CarrierConfig,
    prs: &PrsResourceConfig,
    first_slot: u64,
    n: usize,
) -> Result<SignalBuffer> {
    prs.validate(carrier)?;
    let grids = (0..slots_covering(carrier, first_slot, n) as u64)
        .map(|s| generate_prs_symbols(carrier, prs, first_slot + s))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = ofdm_modulate(&grids, carrier, first_slot)?.into_samples();
    samples.truncate(n);
    SignalBuffer::new(samples, carrier.sample_rate_hz())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToaEstimate {
    pub lag_samples: usize,
    pub delay_s: f64,
    /// |r|² at the peak over the mean |r|² elsewhere, in dB.
    pub peak_to_mean_db: f64,
}

/// Circular correlation of `rx` with a PRS replica of equal length.
pub fn prs_time_of_arrival(rx: &SignalBuffer, replica: &SignalBuffer) -> Result<ToaEstimate> {
    if rx.sample_rate_hz() != replica.sample_rate_hz() {
        return Err(invalid("receive buffer and replica rates differ"));
    }
    let r = fft_correlate(rx.samples(), replica.samples())?;
    if r.is_empty() {
        return Err(invalid("empty buffers"));
    }
    let power: Vec<f64> = r.iter().map(|c| c.norm_sqr()).collect();
    let (lag, peak) = power
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    let rest = (power.iter().sum::<f64>() - peak) / (power.len().max(2) - 1) as f64;
    Ok(ToaEstimate {
        lag_samples: lag,
        delay_s: lag as f64 / rx.sample_rate_hz(),
        peak_to_mean_db: 10.0 * (peak / rest.max(1e-300)).log10(),
    })
}

/// All configured gNBs through their channels, delays relative to the
/// earliest configured gNB.
pub fn synthesize_gnb(cfg: &PrsGenConfig, channels: &ChannelSet) -> Result<SignalBuffer> {
    let ids: Vec<&str> = cfg.gnbs.iter().map(|g| g.source_id.as_str()).collect();
    if ids.is_empty() {
        return Err(invalid("no gNBs configured"));
    }
    let d_min = channels
        .subset(&ids)?
        .min_initial_delay_s()
        .ok_or_else(|| invalid("no gNBs configured"))?;
    synthesize_gnb_with_reference(cfg, channels, d_min)
}

pub fn synthesize_gnb_with_reference(
    cfg: &PrsGenConfig,
    channels: &ChannelSet,
    d_min_s: f64,
) -> Result<SignalBuffer> {
    cfg.validate()?;
    if cfg.gnbs.is_empty() {
        return Err(invalid("no gNBs configured"));
    }
    let n = cfg.sample_count();
    let fs = cfg.carrier.sample_rate_hz();
    let mut combiner = PathCombiner::new(n, fs, channels.update_rate_hz(), d_min_s);
    for g in &cfg.gnbs {
        let source = channels
            .source(&g.source_id)
            .ok_or_else(|| invalid(format!("no channel for gNB {}", g.source_id)))?;
        let clean = render(&cfg.carrier_for(g), &g.prs, g.pdsch_seed, cfg.first_slot, n)?;
        combiner.add(&clean, source)?;
    }
    let out = combiner.finish()?;
    Ok(match cfg.cn0_dbhz {
        Some(cn0) => add_awgn(&out, noise_power_dbw_for_cn0(1.0, cn0, fs), cfg.noise_seed),
        None => out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{PathSeries, SourceChannel, SourceKind};
    use crate::prs::{ofdm_demodulate, CellLabel};

    fn static_set(delays: &[(&str, f64)], f_ch: f64, duration: f64) -> ChannelSet {
        let n = (duration * f_ch).round() as usize;
        let sources = delays
            .iter()
            .map(|(id, d)| {
                let p = PathSeries::constant(num_complex::Complex64::new(1.0, 0.0), *d, n).unwrap();
                SourceChannel::new(*id, SourceKind::Gnb, true, vec![p]).unwrap()
            })
            .collect();
        ChannelSet::new(sources, f_ch, duration).unwrap()
    }

    #[test]
    fn staggered_defaults_interleave() {
        let cfg = PrsGenConfig::staggered(0.01, &["a", "b", "c"]);
        cfg.validate().unwrap();
        assert_eq!(cfg.gnbs[0].prs.comb_offset, 0);
        assert_eq!(cfg.gnbs[1].prs.comb_offset, 1);
        assert_eq!(cfg.gnbs[2].prs.comb_offset, 0);
        assert_eq!(cfg.gnbs[2].prs.resource_offset_slots, 1);
        assert_eq!(cfg.sample_count(), 153_600);
    }

    #[test]
    fn two_gnbs_on_disjoint_combs_do_not_leak() {
        let cfg = PrsGenConfig::staggered(0.001, &["a", "b"]);
        let channels = static_set(&[("a", 0.0), ("b", 0.0)], 40e3, 0.001);
        let mut only_b = cfg.clone();
        only_b.gnbs.remove(0);
        let rx_b = synthesize_gnb_with_reference(&only_b, &channels, 0.0).unwrap();
        let grid_a = generate_prs_symbols(&cfg.carrier, &cfg.gnbs[0].prs, 0).unwrap();
        let got = &ofdm_demodulate(&rx_b, &cfg.carrier, 0).unwrap()[0];
        let mut leak = 0.0;
        for (k, l) in grid_a.cells_labelled(CellLabel::Prs) {
            leak += got.get(k, l).norm_sqr();
        }
        assert!(leak < 1e-20, "{leak}");
        // and the sum demodulates to A's PRS on A's cells
        let rx = synthesize_gnb_with_reference(&cfg, &channels, 0.0).unwrap();
        let got = &ofdm_demodulate(&rx, &cfg.carrier, 0).unwrap()[0];
        for (k, l) in grid_a.cells_labelled(CellLabel::Prs) {
            assert!((got.get(k, l) - grid_a.get(k, l)).norm() < 1e-9);
        }
    }

    #[test]
    fn toa_peak_at_injected_delay() {
        let fs = 15.36e6;
        for d in [0usize, 37, 250] {
            let delay = d as f64 / fs;
            let cfg = PrsGenConfig::staggered(0.001, &["a"]);
            let channels = static_set(&[("a", delay)], 40e3, 0.001);
            let rx = synthesize_gnb_with_reference(&cfg, &channels, 0.0).unwrap();
            let replica = prs_replica(&cfg.carrier, &cfg.gnbs[0].prs, 0, rx.len()).unwrap();
            let est = prs_time_of_arrival(&rx, &replica).unwrap();
            assert_eq!(est.lag_samples, d);
            assert!(est.peak_to_mean_db > 30.0);
        }
    }

    #[test]
    fn duration_sets_length() {
        let mut cfg = PrsGenConfig::staggered(0.0105, &["a"]);
        cfg.gnbs[0].pdsch_seed = Some(1);
        let channels = static_set(&[("a", 1e-6)], 40e3, 0.011);
        let rx = synthesize_gnb(&cfg, &channels).unwrap();
        assert_eq!(rx.len(), 161_280);
        assert_eq!(rx.sample_rate_hz(), 15.36e6);
    }

    #[test]
    fn missing_channel_is_an_error() {
        let cfg = PrsGenConfig::staggered(0.001, &["a", "zz"]);
        let channels = static_set(&[("a", 0.0)], 40e3, 0.001);
        assert!(synthesize_gnb(&cfg, &channels).is_err());
    }
}
