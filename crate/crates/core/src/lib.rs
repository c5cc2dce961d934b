//! Simulation laboratory for the extremes of stationary Gaussian random fields.
//!
//! The crate evaluates the mixed-Gumbel limit law of
//! `P(sup over J^x_m of X(t) <= u)` for multidimensional stationary Gaussian
//! fields, simulates the fields and scaling regimes under which that limit
//! holds, and measures how quickly finite-threshold probabilities approach it.
//!
//! Modules:
//!
//! - [`limit_law`]: normal tails, the tail scale `m(u)`, Gauss–Hermite
//!   evaluation of the limit law and the threshold transforms used for
//!   strongly dependent fields.
//! - [`pickands`]: exact fractional Brownian motion and Monte Carlo
//!   estimates of Pickands constants.
//! - [`fields`]: correlation models, condition validators and exact grid
//!   samplers (Kronecker, circulant embedding, block mixtures).
//! - [`geometry`]: box unions, scaling plans, observation lattices and
//!   inner/outer box approximations.
//! - [`montecarlo`]: sup-distribution experiments, convergence studies and
//!   numerical diagnostics.

pub mod embedding;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod limit_law;
pub mod montecarlo;
pub mod pickands;
pub mod replicate;

pub use error::{Error, Result};
