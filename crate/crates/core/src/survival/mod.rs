//! Varying-coefficient proportional hazards
//! `lambda(t|X,Z) = lambda0(t) exp{beta(X)'Z + g(X)}`.
//!
//! [`fit_local`] maximizes the kernel-weighted local partial likelihood at one
//! biomarker value; [`fit_curve`] repeats it over a grid and projects onto a
//! contrast; [`scb_survival`] bands the contrast curve by multiplier
//! resampling of the local scores.

mod curve;
mod local;
mod scb;

pub use curve::{fit_curve, GridFailure, SurvivalCsteFit, SurvivalFitOptions};
pub use local::{fit_local, LocalFit};
pub use scb::{scb_survival, SurvivalBandOptions};
