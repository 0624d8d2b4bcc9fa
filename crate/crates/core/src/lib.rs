//! Regularization of linear ill-posed operator equations `Au = f` with noisy
//! data `f_delta`, `||f_delta - f|| <= delta`.
//!
//! Four families of methods are provided on discretized problems over
//! `[0, 1]`:
//!
//! - [`variational`]: Tikhonov regularization with a-priori or
//!   discrepancy-principle choice of `alpha`,
//! - [`quasisol`]: quasi-solutions on a norm ball,
//! - [`landweber`]: Landweber iteration with early stopping,
//! - [`dsm`]: the dynamical systems method `u' = -u + (B + eps(t))^{-1} A* f_delta`.
//!
//! [`harness`] runs noise-level sweeps over these methods and writes CSV reports.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsm;
pub mod error;
pub mod harness;
pub mod landweber;
pub mod linops;
pub mod problems;
pub mod quasisol;
mod roots;
pub mod solution;
pub mod variational;

pub use error::{Error, Result};
pub use linops::{DiscreteOperator, Grid, SpectralData};
pub use problems::{NoisyData, Problem, ProblemKind, Truth};
pub use solution::{Method, RegularizedSolution, Status};
