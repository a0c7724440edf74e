//! Software receiver used to validate synthesized waveforms: FFT-based
//! acquisition with a peak-to-noise gate, fine frequency estimation, and
//! DLL/PLL tracking.

mod acquisition;
mod tracking;

pub use acquisition::{
    acquire, fine_frequency, peak_to_noise_db, AcquisitionConfig, AcquisitionResult,
};
pub use tracking::{
    dll_discriminator, pll_discriminator, track, LoopFilter, TrackingConfig, TrackingRecord,
    TrackingTrace, L1_CARRIER_HZ,
};
