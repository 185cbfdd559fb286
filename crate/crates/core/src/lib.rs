//! Exceptional points of parametrized non-Hermitian Hamiltonians: location,
//! Jordan chains, eigenbranch tracking and geometric phases of double cycles.

pub mod asymptotics;
pub mod cli;
pub mod eppoint;
pub mod error;
pub mod hamiltonians;
pub mod numerics;
pub mod phase;
pub mod spectral;
pub mod versal;

pub use error::{EpError, Result};
