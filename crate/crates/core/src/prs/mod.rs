//! NR positioning reference signal: numerology, resource configuration,
//! sequence generation, resource-grid mapping, OFDM, and gNB synthesis.

mod ofdm;
mod synth;

pub use ofdm::{cp_alignment_metric, ofdm_demodulate, ofdm_modulate};
pub use synth::{
    prs_replica, prs_time_of_arrival, synthesize_gnb, synthesize_gnb_with_reference, GnbConfig,
    PrsGenConfig,
};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SYMBOLS_PER_SLOT: usize = 14;
pub const FRAME_DURATION_S: f64 = 0.010;
pub const SUBCARRIERS_PER_RB: usize = 12;
const GOLD_NC: usize = 1600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CyclicPrefix {
    Normal,
}

fn default_scs() -> f64 {
    15e3
}

fn default_n_rb() -> usize {
    52
}

fn default_n_fft() -> usize {
    1024
}

fn default_cp() -> CyclicPrefix {
    CyclicPrefix::Normal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierConfig {
    #[serde(default)]
    pub n_cell_id: u16,
    #[serde(default = "default_scs")]
    pub scs_hz: f64,
    #[serde(default = "default_n_rb")]
    pub n_rb: usize,
    #[serde(default = "default_n_fft")]
    pub n_fft: usize,
    #[serde(default = "default_cp")]
    pub cyclic_prefix: CyclicPrefix,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        Self {
            n_cell_id: 0,
            scs_hz: default_scs(),
            n_rb: default_n_rb(),
            n_fft: default_n_fft(),
            cyclic_prefix: CyclicPrefix::Normal,
        }
    }
}

impl CarrierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cell_id > 1007 {
            return Err(invalid(format!("n_cell_id {} outside 0..=1007", self.n_cell_id)));
        }
        self.numerology()?;
        if self.n_rb == 0 {
            return Err(invalid("n_rb must be positive"));
        }
        if self.n_fft % 128 != 0 || self.n_fft == 0 {
            return Err(invalid(format!("n_fft {} must be a multiple of 128", self.n_fft)));
        }
        if self.n_fft < self.subcarriers() {
            return Err(invalid(format!(
                "n_fft {} smaller than the {} grid subcarriers",
                self.n_fft,
                self.subcarriers()
            )));
        }
        Ok(())
    }

    /// μ with SCS = 15 kHz·2^μ.
    pub fn numerology(&self) -> Result<u32> {
        (0..=4)
            .find(|&mu| 15e3 * f64::from(1u32 << mu) == self.scs_hz)
            .ok_or_else(|| invalid(format!("unsupported subcarrier spacing {} Hz", self.scs_hz)))
    }

    pub fn subcarriers(&self) -> usize {
        SUBCARRIERS_PER_RB * self.n_rb
    }

    /// N_fft·SCS.
    pub fn sample_rate_hz(&self) -> f64 {
        self.n_fft as f64 * self.scs_hz
    }

    pub fn slots_per_subframe(&self) -> usize {
        1 << self.numerology().unwrap_or(0)
    }

    pub fn slots_per_frame(&self) -> usize {
        10 * self.slots_per_subframe()
    }

    pub fn slot_duration_s(&self) -> f64 {
        1e-3 / self.slots_per_subframe() as f64
    }

    /// Cyclic prefix length of symbol `l` of slot `slot`. The first symbol of
    /// every half subframe carries the 16κ extension.
    pub fn cp_len(&self, slot: usize, l: usize) -> usize {
        let per_half = SYMBOLS_PER_SLOT / 2 * self.slots_per_subframe();
        let in_subframe = (slot % self.slots_per_subframe()) * SYMBOLS_PER_SLOT + l;
        let base = 144 * self.n_fft / 2048;
        if in_subframe % per_half == 0 {
            base + 16 * self.n_fft / 2048 * self.slots_per_subframe()
        } else {
            base
        }
    }

    pub fn samples_per_slot(&self, slot: usize) -> usize {
        (0..SYMBOLS_PER_SLOT).map(|l| self.n_fft + self.cp_len(slot, l)).sum()
    }
}

fn default_period() -> u32 {
    10
}

fn default_one() -> u32 {
    1
}

fn default_comb() -> usize {
    2
}

fn default_symbols() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrsResourceConfig {
    #[serde(default = "default_period")]
    pub resource_set_period_slots: u32,
    #[serde(default)]
    pub resource_offset_slots: u32,
    #[serde(default = "default_one")]
    pub resource_repetition: u32,
    #[serde(default = "default_one")]
    pub resource_time_gap_slots: u32,
    /// One bit per resource-set instance, cycled; `false` mutes.
    #[serde(default)]
    pub muting_pattern: Option<Vec<bool>>,
    #[serde(default = "default_comb")]
    pub comb_size: usize,
    #[serde(default)]
    pub comb_offset: usize,
    #[serde(default = "default_symbols")]
    pub num_symbols: usize,
    #[serde(default)]
    pub symbol_start: usize,
    #[serde(default)]
    pub n_prs_id: u16,
    #[serde(default = "default_n_rb")]
    pub n_rb_prs: usize,
    #[serde(default)]
    pub rb_start: usize,
}

impl Default for PrsResourceConfig {
    fn default() -> Self {
        Self {
            resource_set_period_slots: default_period(),
            resource_offset_slots: 0,
            resource_repetition: 1,
            resource_time_gap_slots: 1,
            muting_pattern: None,
            comb_size: default_comb(),
            comb_offset: 0,
            num_symbols: default_symbols(),
            symbol_start: 0,
            n_prs_id: 0,
            n_rb_prs: default_n_rb(),
            rb_start: 0,
        }
    }
}

/// Per-symbol frequency offset k' for each allowed comb size.
fn comb_shift(comb: usize, l_rel: usize) -> usize {
    const K2: [usize; 2] = [0, 1];
    const K4: [usize; 4] = [0, 2, 1, 3];
    const K6: [usize; 6] = [0, 3, 1, 4, 2, 5];
    const K12: [usize; 12] = [0, 6, 3, 9, 1, 7, 4, 10, 2, 8, 5, 11];
    let table: &[usize] = match comb {
        2 => &K2,
        4 => &K4,
        6 => &K6,
        _ => &K12,
    };
    table[l_rel % table.len()]
}

impl PrsResourceConfig {
    pub fn validate(&self, carrier: &CarrierConfig) -> Result<()> {
        let allowed_symbols: &[usize] = match self.comb_size {
            2 => &[2, 4, 6, 12],
            4 => &[4, 12],
            6 => &[6, 12],
            12 => &[12],
            c => return Err(invalid(format!("comb size {c} not in {{2, 4, 6, 12}}"))),
        };
        if !allowed_symbols.contains(&self.num_symbols) {
            return Err(invalid(format!(
                "comb size {} does not allow {} PRS symbols",
                self.comb_size, self.num_symbols
            )));
        }
        if self.comb_offset >= self.comb_size {
            return Err(invalid(format!(
                "comb offset {} must be below comb size {}",
                self.comb_offset, self.comb_size
            )));
        }
        if self.symbol_start + self.num_symbols > SYMBOLS_PER_SLOT {
            return Err(invalid("PRS symbols run past the end of the slot"));
        }
        if self.resource_set_period_slots == 0 {
            return Err(invalid("resource set period must be positive"));
        }
        if self.resource_offset_slots >= self.resource_set_period_slots {
            return Err(invalid("resource offset must be below the resource set period"));
        }
        if self.resource_repetition == 0 || self.resource_time_gap_slots == 0 {
            return Err(invalid("resource repetition and time gap must be positive"));
        }
        if (self.resource_repetition - 1) * self.resource_time_gap_slots >= self.resource_set_period_slots {
            return Err(invalid("repetitions do not fit in the resource set period"));
        }
        if matches!(&self.muting_pattern, Some(p) if p.is_empty()) {
            return Err(invalid("muting pattern must not be empty"));
        }
        if self.n_prs_id > 4095 {
            return Err(invalid(format!("n_prs_id {} outside 0..=4095", self.n_prs_id)));
        }
        if self.n_rb_prs == 0 || self.rb_start + self.n_rb_prs > carrier.n_rb {
            return Err(invalid("PRS bandwidth does not fit in the carrier"));
        }
        Ok(())
    }

    /// Whether slot `slot` (counted from frame 0) carries unmuted PRS.
    pub fn is_prs_slot(&self, slot: u64) -> bool {
        let period = u64::from(self.resource_set_period_slots);
        let shifted = slot as i64 - i64::from(self.resource_offset_slots);
        let phase = shifted.rem_euclid(period as i64) as u64;
        let gap = u64::from(self.resource_time_gap_slots);
        let scheduled = phase % gap == 0 && phase / gap < u64::from(self.resource_repetition);
        if !scheduled {
            return false;
        }
        match &self.muting_pattern {
            Some(bits) => {
                let instance = shifted.div_euclid(period as i64).rem_euclid(bits.len() as i64);
                bits[instance as usize]
            }
            None => true,
        }
    }

    /// Subcarrier of sequence element `m` on PRS symbol `l`.
    pub fn subcarrier(&self, m: usize, l: usize) -> usize {
        let shift = comb_shift(self.comb_size, l - self.symbol_start);
        SUBCARRIERS_PER_RB * self.rb_start
            + m * self.comb_size
            + (self.comb_offset + shift) % self.comb_size
    }

    /// PRS elements per symbol.
    pub fn elements_per_symbol(&self) -> usize {
        SUBCARRIERS_PER_RB * self.n_rb_prs / self.comb_size
    }
}

/// Length-31 Gold sequence c(n) with the N_c = 1600 offset.
pub fn gold_sequence(c_init: u32, len: usize) -> Vec<u8> {
    let total = len + GOLD_NC;
    let mut x1 = vec![0u8; total + 31];
    let mut x2 = vec![0u8; total + 31];
    x1[0] = 1;
    for (i, bit) in x2.iter_mut().take(31).enumerate() {
        *bit = ((c_init >> i) & 1) as u8;
    }
    for n in 0..total {
        x1[n + 31] = x1[n + 3] ^ x1[n];
        x2[n + 31] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n];
    }
    (0..len).map(|n| x1[n + GOLD_NC] ^ x2[n + GOLD_NC]).collect()
}

/// Scrambler seed of PRS symbol `l` in slot `slot_in_frame`.
pub fn prs_c_init(n_prs_id: u16, slot_in_frame: usize, l: usize) -> u32 {
    let id = u64::from(n_prs_id);
    let v = (1u64 << 22) * (id / 1024)
        + (1u64 << 10) * (SYMBOLS_PER_SLOT * slot_in_frame + l + 1) as u64 * (2 * (id % 1024) + 1)
        + id % 1024;
    (v % (1u64 << 31)) as u32
}

fn qpsk(b0: u8, b1: u8) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(s * (1.0 - 2.0 * f64::from(b0)), s * (1.0 - 2.0 * f64::from(b1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellLabel {
    Empty,
    Prs,
    Pdsch,
    Dmrs,
}

/// One slot of subcarriers × OFDM symbols. Subcarrier 0 is the lowest
/// frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    subcarriers: usize,
    cells: Vec<Complex64>,
    labels: Vec<CellLabel>,
}

impl ResourceGrid {
    pub fn new(subcarriers: usize) -> Self {
        Self {
            subcarriers,
            cells: vec![Complex64::default(); subcarriers * SYMBOLS_PER_SLOT],
            labels: vec![CellLabel::Empty; subcarriers * SYMBOLS_PER_SLOT],
        }
    }

    pub fn for_carrier(carrier: &CarrierConfig) -> Self {
        Self::new(carrier.subcarriers())
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn symbols(&self) -> usize {
        SYMBOLS_PER_SLOT
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.cells[l * self.subcarriers + k]
    }

    pub fn label(&self, k: usize, l: usize) -> CellLabel {
        self.labels[l * self.subcarriers + k]
    }

    pub fn set(&mut self, k: usize, l: usize, value: Complex64, label: CellLabel) {
        self.cells[l * self.subcarriers + k] = value;
        self.labels[l * self.subcarriers + k] = label;
    }

    /// Subcarriers of symbol `l`.
    pub fn symbol(&self, l: usize) -> &[Complex64] {
        &self.cells[l * self.subcarriers..(l + 1) * self.subcarriers]
    }

    pub fn count(&self, label: CellLabel) -> usize {
        self.labels.iter().filter(|&&x| x == label).count()
    }

    /// Cells (k, l) carrying `label`.
    pub fn cells_labelled(&self, label: CellLabel) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &x)| x == label)
            .map(|(i, _)| (i % self.subcarriers, i / self.subcarriers))
    }

    /// Copies every non-empty cell of `other` over this grid; overlapping
    /// non-empty cells are an error.
    pub fn merge(&mut self, other: &ResourceGrid) -> Result<()> {
        if other.subcarriers != self.subcarriers {
            return Err(invalid("grid sizes differ"));
        }
        for i in 0..self.cells.len() {
            if other.labels[i] == CellLabel::Empty {
                continue;
            }
            if self.labels[i] != CellLabel::Empty {
                return Err(invalid(format!(
                    "cell ({}, {}) already occupied",
                    i % self.subcarriers,
                    i / self.subcarriers
                )));
            }
            self.cells[i] = other.cells[i];
            self.labels[i] = other.labels[i];
        }
        Ok(())
    }

    pub(crate) fn from_cells(subcarriers: usize, cells: Vec<Complex64>) -> Self {
        let labels = vec![CellLabel::Empty; cells.len()];
        Self {
            subcarriers,
            cells,
            labels,
        }
    }
}

/// PRS cells of slot `slot_index` (counted from frame 0).
pub fn generate_prs_symbols(
    carrier: &CarrierConfig,
    prs: &PrsResourceConfig,
    slot_index: u64,
) -> Result<ResourceGrid> {
    carrier.validate()?;
    prs.validate(carrier)?;
    let mut grid = ResourceGrid::for_carrier(carrier);
    if !prs.is_prs_slot(slot_index) {
        return Ok(grid);
    }
    let slot_in_frame = (slot_index % carrier.slots_per_frame() as u64) as usize;
    let m_count = prs.elements_per_symbol();
    for l in prs.symbol_start..prs.symbol_start + prs.num_symbols {
        let c = gold_sequence(prs_c_init(prs.n_prs_id, slot_in_frame, l), 2 * m_count);
        for m in 0..m_count {
            grid.set(prs.subcarrier(m, l), l, qpsk(c[2 * m], c[2 * m + 1]), CellLabel::Prs);
        }
    }
    Ok(grid)
}

/// Seeded QPSK payload on the OFDM symbols of the slot that carry no PRS.
pub fn generate_pdsch_filler(
    carrier: &CarrierConfig,
    prs: &PrsResourceConfig,
    seed: u64,
    slot_index: u64,
) -> Result<ResourceGrid> {
    carrier.validate()?;
    prs.validate(carrier)?;
    let prs_here = prs.is_prs_slot(slot_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot_index);
    let mut grid = ResourceGrid::for_carrier(carrier);
    for l in 0..SYMBOLS_PER_SLOT {
        if prs_here && (prs.symbol_start..prs.symbol_start + prs.num_symbols).contains(&l) {
            continue;
        }
        for k in 0..grid.subcarriers() {
            let (b0, b1) = (rng.random::<bool>() as u8, rng.random::<bool>() as u8);
            grid.set(k, l, qpsk(b0, b1), CellLabel::Pdsch);
        }
    }
    Ok(grid)
}

/// PRS plus optional filler for one slot.
pub fn slot_grid(
    carrier: &CarrierConfig,
    prs: &PrsResourceConfig,
    pdsch_seed: Option<u64>,
    slot_index: u64,
) -> Result<ResourceGrid> {
    let mut grid = generate_prs_symbols(carrier, prs, slot_index)?;
    if let Some(seed) = pdsch_seed {
        grid.merge(&generate_pdsch_filler(carrier, prs, seed, slot_index)?)?;
    }
    Ok(grid)
}
