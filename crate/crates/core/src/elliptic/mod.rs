//! Anisotropic elliptic problem for the helical stream function.

pub mod green;
pub mod grid;
pub mod operator;

pub use green::{green_probe, singular_part, GreenProbeReport, GreenSample};
pub use grid::{PolarGrid, ScalarField};
pub use operator::{Backend, EllipticOperator, SolveStats};
