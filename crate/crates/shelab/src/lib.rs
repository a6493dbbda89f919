//! Numerical laboratory for spatial averages of the linear (fractional)
//! stochastic heat equation.
//!
//! The equation `∂_t u = -v(-Δ)^{α/2} u + u·η` is simulated in three regimes
//! (fractional with space-time white noise; heat with spatially colored
//! noise; heat with delta initial data via the pinned field `U = u/p_t`),
//! and the variance asymptotics, kernel identities, and Gaussian convergence
//! of the normalized window averages are checked against deterministic
//! oracles and Monte Carlo ensembles.

pub mod error;
pub mod fft;
pub mod functionals;
pub mod kernels;
pub mod noise;
pub mod oracle;
pub mod quad;
pub mod solver;
pub mod stats;

pub mod cli;

pub use error::{Error, Result};
