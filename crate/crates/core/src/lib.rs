//! Covariate-specific treatment effect (CSTE) curves.
//!
//! Two estimators share one curve type:
//!
//! * [`binary`] fits `logit P(Y=1|X,Z) = g1(X'b1) Z + g2(X'b2)` with B-spline
//!   links and a sparsity penalty, refines `g1` by spline-backfitted kernel
//!   smoothing and builds a multiplier-bootstrap simultaneous band.
//! * [`survival`] fits `lambda(t|X,Z) = lambda0(t) exp{beta(X)'Z + g(X)}` by
//!   local partial likelihood over a biomarker grid and bands contrasts
//!   `l'beta(x)` by resampling.
//!
//! [`itr`] turns a banded curve into cutoffs, signed regions and per-subject
//! treatment advice.

pub mod binary;
pub mod curve;
pub mod data;
pub mod error;
pub mod export;
pub mod itr;
pub mod numkit;
pub mod pipeline;
pub mod survival;

pub use curve::CsteCurve;
pub use error::{CsteError, Result};
