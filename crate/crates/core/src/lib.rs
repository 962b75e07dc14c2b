//! Phase-space simulation of compass states and their photon-added /
//! photon-subtracted variants under a thermal amplitude-damping channel.

pub mod analysis;
pub mod error;
pub mod grid;
pub mod oracle;
pub mod params;
pub mod patch;
pub mod quadrature;
pub mod special;
pub mod states;
pub mod wigner;

pub use error::{Error, Result};
pub use params::{CompassParams, ReservoirParams};
