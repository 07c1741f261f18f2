//! Bivariate discrete Weibull (BDW) distribution.
//!
//! Probability functions, sampling and dependence properties of the BDW law
//! and of its latent continuous counterpart (Marshall-Olkin bivariate
//! Weibull), maximum-likelihood estimation by a nested EM algorithm,
//! Bayesian estimation by an augmented Gibbs sampler, and chi-square
//! goodness-of-fit tests.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bdw;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod fit_bayes;
pub mod fit_ml;
pub mod gof;
pub mod mobw;
pub mod optim;
pub mod univariate;

pub use error::{Error, Result};
