//! Potential-based regret minimization for decision-theoretic online learning.
//!
//! The crate is organised around five modules:
//!
//! - [`potential`]: time-indexed potentials (exponential, NormalHedge, Gaussian
//!   convolution of a final potential), their derivatives, Kolmogorov residuals,
//!   strict-positivity diagnostics and divided differences.
//! - [`measure`]: finite atomic regret distributions (the game state), loss maps,
//!   convolution updates, percentile regrets and the simultaneous-bound /
//!   average-potential checks.
//! - [`games`]: the integer, discrete and continuous time game engines together
//!   with learner and adversary strategies, plus a finite-expert runner.
//! - [`analysis`]: backward-induction lattice tables, exact binomial values,
//!   convergence and monotonicity studies, variance statistics and regret bounds.
//! - [`cli`]: the experiment runner behind the `potgame` binary.

pub mod analysis;
pub mod cli;
mod error;
pub mod games;
pub mod measure;
pub mod potential;

pub use error::{Error, Result};
