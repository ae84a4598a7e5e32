//! Minimax-optimal interpolation and extrapolation designs for polynomial
//! regression.
//!
//! The crate builds Hoel-Levine (extrapolation) and Guest (interpolation) designs,
//! evaluates the variance of the Lagrange estimator under a design, computes the
//! crossover radius between the two, produces confidence intervals, extends the
//! extrapolation construction to tensor-product designs on a stress rectangle and
//! checks all of it by seeded Monte Carlo simulation.

// `!(x > 0.0)` style guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bivariate;
pub mod cli;
pub mod design;
pub mod error;
pub mod inference;
pub mod io;
pub mod poly;
pub mod sim;
pub mod variance;

pub use design::{Design, DesignKind, DesignRequest};
pub use error::{Error, Result};
pub use poly::{Interval, LegendreEval, NodeSet};
pub use variance::{Allocation, CrossoverResult, VarianceProfile};
