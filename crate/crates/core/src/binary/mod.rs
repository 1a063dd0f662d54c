//! Binary-outcome single-index model
//! `logit P(Y=1|X,Z) = g1(X'beta1) Z + g2(X'beta2)`.
//!
//! [`fit_binary`] alternates a B-spline logistic fit of `(g1, g2)` with a
//! penalized Newton step in `(beta1, beta2)`; [`select_lambda`] scans a tuning
//! grid by BIC; [`sbk_smooth`] re-estimates `g1` by local-linear kernel
//! likelihood with `g2` held as an offset; [`scb_binary`] bands the result.

mod fit;
mod logistic;
mod sbk;
mod scb;
mod select;

pub use fit::{fit_binary, BinaryCsteFit, BinaryFitOptions, Convergence};
pub use sbk::{sbk_smooth, LocalLogitFit, SbkSmoother};
pub use scb::{scb_binary, BinaryBandOptions};
pub use select::{select_lambda, LambdaEntry, LambdaPath};
