pub mod beamforming;
pub mod bounds;
pub mod gain_stats;
pub mod power;
pub mod error;
pub mod experiments;
pub mod fading;
pub mod rng;

pub use error::{Error, Result};
