//! Concentrated helical vortex states in a cylinder: variational construction
//! of the planar cross-section, its evolution, and the helical 3D lift.

pub mod cli_io;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod elliptic;
pub mod geometry;
pub mod reconstruct;
pub mod sampling;
pub mod selftest;
pub mod variational;

pub use error::{Error, Result};
