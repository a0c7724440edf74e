//! Signal synthesis and receiver processing for hybrid satellite, HAPS and
//! terrestrial positioning studies.

pub mod channel;
pub mod dsp;
pub mod error;
pub mod prn;

pub use error::{Error, Result};
pub mod cdma;
pub mod prs;
pub mod receiver;
