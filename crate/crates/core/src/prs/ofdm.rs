use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{CarrierConfig, ResourceGrid, SYMBOLS_PER_SLOT};
use crate::dsp::SignalBuffer;
use crate::error::{invalid, Result};

/// FFT bin of grid subcarrier `k`; the grid centre sits on DC.
fn bin(k: usize, subcarriers: usize, n_fft: usize) -> usize {
    (k as i64 - (subcarriers / 2) as i64).rem_euclid(n_fft as i64) as usize
}

/// Modulates consecutive slots, the first being slot `first_slot` of the
/// frame. Unitary transform: a grid of unit cells gives symbols of power
/// N_sc/N_fft.
pub fn ofdm_modulate(
    grids: &[ResourceGrid],
    carrier: &CarrierConfig,
    first_slot: u64,
) -> Result<SignalBuffer> {
    carrier.validate()?;
    let n_fft = carrier.n_fft;
    let n_sc = carrier.subcarriers();
    if let Some(g) = grids.iter().find(|g| g.subcarriers() != n_sc) {
        return Err(invalid(format!(
            "grid has {} subcarriers, carrier has {n_sc}",
            g.subcarriers()
        )));
    }
    let ifft = FftPlanner::new().plan_fft_inverse(n_fft);
    let scale = 1.0 / (n_fft as f64).sqrt();
    let mut out = Vec::new();
    let mut freq = vec![Complex64::default(); n_fft];
    for (s, grid) in grids.iter().enumerate() {
        let slot = (first_slot as usize + s) % carrier.slots_per_frame();
        for l in 0..SYMBOLS_PER_SLOT {
            freq.iter_mut().for_each(|x| *x = Complex64::default());
            for (k, &v) in grid.symbol(l).iter().enumerate() {
                freq[bin(k, n_sc, n_fft)] = v * scale;
            }
            ifft.process(&mut freq);
            let cp = carrier.cp_len(slot, l);
            out.extend_from_slice(&freq[n_fft - cp..]);
            out.extend_from_slice(&freq);
        }
    }
    SignalBuffer::new(out, carrier.sample_rate_hz())
}

/// Inverse of [`ofdm_modulate`] for a buffer that starts on a slot boundary
/// and holds whole slots. Cell labels come back empty.
pub fn ofdm_demodulate(
    buf: &SignalBuffer,
    carrier: &CarrierConfig,
    first_slot: u64,
) -> Result<Vec<ResourceGrid>> {
    carrier.validate()?;
    if buf.sample_rate_hz() != carrier.sample_rate_hz() {
        return Err(invalid(format!(
            "buffer rate {} Hz does not match the carrier rate {} Hz",
            buf.sample_rate_hz(),
            carrier.sample_rate_hz()
        )));
    }
    let n_fft = carrier.n_fft;
    let n_sc = carrier.subcarriers();
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let scale = 1.0 / (n_fft as f64).sqrt();
    let x = buf.samples();
    let mut grids = Vec::new();
    let mut pos = 0;
    let mut slot = first_slot as usize;
    while pos < x.len() {
        let slot_in_frame = slot % carrier.slots_per_frame();
        let need = carrier.samples_per_slot(slot_in_frame);
        if pos + need > x.len() {
            return Err(invalid(format!(
                "{} trailing samples do not form a whole slot",
                x.len() - pos
            )));
        }
        let mut cells = vec![Complex64::default(); n_sc * SYMBOLS_PER_SLOT];
        for l in 0..SYMBOLS_PER_SLOT {
            pos += carrier.cp_len(slot_in_frame, l);
            let mut freq = x[pos..pos + n_fft].to_vec();
            fft.process(&mut freq);
            for k in 0..n_sc {
                cells[l * n_sc + k] = freq[bin(k, n_sc, n_fft)] * scale;
            }
            pos += n_fft;
        }
        grids.push(ResourceGrid::from_cells(n_sc, cells));
        slot += 1;
    }
    Ok(grids)
}

/// Mean normalised correlation between each cyclic prefix and the symbol
/// tail it copies, over symbols with energy, taking slot boundaries at
/// `start + j·slot length`. Near 1 when aligned, lower with timing error.
pub fn cp_alignment_metric(buf: &SignalBuffer, carrier: &CarrierConfig, start: usize) -> Result<f64> {
    carrier.validate()?;
    let n_fft = carrier.n_fft;
    let x = buf.samples();
    let mut pos = start;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut slot = 0usize;
    'outer: loop {
        for l in 0..SYMBOLS_PER_SLOT {
            let cp = carrier.cp_len(slot % carrier.slots_per_frame(), l);
            if pos + cp + n_fft > x.len() {
                break 'outer;
            }
            let head = &x[pos..pos + cp];
            let tail = &x[pos + n_fft..pos + n_fft + cp];
            let cross: Complex64 = head.iter().zip(tail).map(|(a, b)| a * b.conj()).sum();
            let ea: f64 = head.iter().map(|a| a.norm_sqr()).sum();
            let eb: f64 = tail.iter().map(|b| b.norm_sqr()).sum();
            if ea > 0.0 && eb > 0.0 {
                total += cross.norm() / (ea * eb).sqrt();
                count += 1;
            }
            pos += cp + n_fft;
        }
        slot += 1;
    }
    if count == 0 {
        return Err(invalid("no OFDM symbol with energy in the buffer"));
    }
    Ok(total / count as f64)
}
