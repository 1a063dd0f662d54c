//! Numerical building blocks shared by the binary and survival estimators.

pub mod bspline;
pub mod kernel;
pub mod linalg;
pub mod newton;
pub mod penalty;
pub mod rng;
pub mod stats;

pub use bspline::{bspline_basis, bspline_basis_derivative, KnotVector};
pub use kernel::{kernel_weight, Kernel};
pub use newton::{newton_maximize, NewtonOptions, NewtonResult, SmoothObjective};
pub use penalty::{scad_derivative, Penalty, ScadPenalty};
pub use rng::RngStream;
