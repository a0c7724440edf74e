//! GPS L1 C/A Gold code generation.
//!
//! Two 10-stage maximal-length shift registers, G1 (x^10 + x^3 + 1) and
//! G2 (x^10 + x^9 + x^8 + x^6 + x^3 + x^2 + 1), both seeded with all ones.
//! Each PRN selects its G2 phase by XOR-ing a pair of G2 stages.

use crate::error::{invalid, Result};

/// Chips per C/A code period.
pub const CODE_LENGTH: usize = 1023;

/// Nominal L1 C/A chipping rate.
pub const CA_CHIPPING_RATE_HZ: f64 = 1.023e6;

pub const MAX_PRN: u8 = 32;

/// G2 phase-select stage pairs (1-based), PRN 1..=32.
const G2_TAPS: [(usize, usize); 32] = [
    (2, 6),
    (3, 7),
    (4, 8),
    (5, 9),
    (1, 9),
    (2, 10),
    (1, 8),
    (2, 9),
    (3, 10),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (1, 4),
    (2, 5),
    (3, 6),
    (4, 7),
    (5, 8),
    (6, 9),
    (1, 3),
    (4, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 6),
    (2, 7),
    (3, 8),
    (4, 9),
];

/// A ±1 spreading sequence of exactly [`CODE_LENGTH`] chips.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingCode {
    prn: u8,
    chips: Vec<f64>,
    chipping_rate_hz: f64,
}

impl SpreadingCode {
    /// Wraps an arbitrary chip sequence. Mostly useful for degenerate test
    /// codes; real codes come from [`generate_ca_code`].
    pub fn from_chips(prn: u8, chips: Vec<f64>, chipping_rate_hz: f64) -> Result<Self> {
        if chips.len() != CODE_LENGTH {
            return Err(invalid(format!(
                "spreading code must have {CODE_LENGTH} chips, got {}",
                chips.len()
            )));
        }
        if let Some(bad) = chips.iter().position(|&c| c != 1.0 && c != -1.0) {
            return Err(invalid(format!("chip {bad} is not +1 or -1")));
        }
        check_rate(chipping_rate_hz)?;
        Ok(Self {
            prn,
            chips,
            chipping_rate_hz,
        })
    }

    pub fn prn(&self) -> u8 {
        self.prn
    }

    pub fn chips(&self) -> &[f64] {
        &self.chips
    }

    pub fn chipping_rate_hz(&self) -> f64 {
        self.chipping_rate_hz
    }

    pub fn period_s(&self) -> f64 {
        CODE_LENGTH as f64 / self.chipping_rate_hz
    }

    /// Same chips clocked at a different rate (HAPS reuse the C/A family at
    /// 10.23 MHz).
    pub fn with_chipping_rate(mut self, chipping_rate_hz: f64) -> Result<Self> {
        check_rate(chipping_rate_hz)?;
        self.chipping_rate_hz = chipping_rate_hz;
        Ok(self)
    }

    /// Chip value at an arbitrary (possibly negative) chip index.
    #[inline]
    pub fn chip(&self, index: i64) -> f64 {
        self.chips[index.rem_euclid(CODE_LENGTH as i64) as usize]
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid(format!("chipping rate must be positive, got {rate}")));
    }
    Ok(())
}

/// Generates the C/A code for `prn_id` in 1..=32, chipped at 1.023 MHz.
/// Logic 0 maps to +1 and logic 1 to -1.
pub fn generate_ca_code(prn_id: u8) -> Result<SpreadingCode> {
    if !(1..=MAX_PRN).contains(&prn_id) {
        return Err(invalid(format!("PRN {prn_id} outside 1..={MAX_PRN}")));
    }
    let (a, b) = G2_TAPS[prn_id as usize - 1];
    // stage i (1-based) lives at index i-1
    let mut g1 = [1u8; 10];
    let mut g2 = [1u8; 10];
    let mut chips = Vec::with_capacity(CODE_LENGTH);
    for _ in 0..CODE_LENGTH {
        let bit = g1[9] ^ g2[a - 1] ^ g2[b - 1];
        chips.push(if bit == 0 { 1.0 } else { -1.0 });

        let f1 = g1[2] ^ g1[9];
        let f2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9];
        g1.rotate_right(1);
        g2.rotate_right(1);
        g1[0] = f1;
        g2[0] = f2;
    }
    Ok(SpreadingCode {
        prn: prn_id,
        chips,
        chipping_rate_hz: CA_CHIPPING_RATE_HZ,
    })
}

/// Normalized circular cross-correlation `(1/N) Σ a[i]·b[(i+lag) mod N]`.
pub fn circular_cross_correlation(a: &SpreadingCode, b: &SpreadingCode, lag: i64) -> f64 {
    let n = CODE_LENGTH as i64;
    let shift = lag.rem_euclid(n) as usize;
    let (head, tail) = b.chips.split_at(shift);
    let sum: f64 = a
        .chips
        .iter()
        .zip(tail.iter().chain(head.iter()))
        .map(|(x, y)| x * y)
        .sum();
    sum / CODE_LENGTH as f64
}

pub fn circular_autocorrelation(code: &SpreadingCode, lag: i64) -> f64 {
    circular_cross_correlation(code, code, lag)
}
