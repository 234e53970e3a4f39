//! Statistical multiresolution estimation.
//!
//! An SMRE is a minimizer of a convex regularizer `J(u)` subject to the
//! multiscale residual constraint
//!
//! ```text
//! max_S | sum_v w^S_v Lambda(Y - K u)_v | <= q
//! ```
//!
//! taken over a redundant system of windows `S`. The solver is an ADMM loop
//! that alternates a penalized least-squares step for `u` (see [`prox`]) with
//! a Euclidean projection of the slack variable onto the feasible set, which
//! is computed by Dykstra's cyclic projection over groups of windows with
//! pairwise disjoint supports (see [`projections`]).
//!
//! Module map:
//!
//! * [`grid`]: lattices, signals, pointwise transforms, forward differences.
//! * [`windows`]: cube window systems and their disjoint-group partition.
//! * [`constraints`]: weighted constraint systems and the MR statistic.
//! * [`operators`]: identity, Gaussian convolution and dense forward operators.
//! * [`projections`]: closed-form projections and Dykstra's algorithm.
//! * [`prox`]: regularizers and penalized least-squares solvers.
//! * [`admm`]: the outer loop and its lagged-standardization variant.
//! * [`quantiles`]: Monte-Carlo calibration of the threshold `q`.
//! * [`metrics`]: ISE/IAE, symmetric Bregman divergence, local maxima.
//! * [`synthetic`]: deterministic test signals and noise.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admm;
pub mod constraints;
mod error;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod projections;
pub mod prox;
pub mod quantiles;
pub mod synthetic;
pub mod windows;

pub use admm::{admm_solve, admm_solve_poisson, AdmmConfig, AdmmReport, ExitStatus};
pub use constraints::{mr_statistic, ConstraintSystem, Weighting};
pub use error::{Result, SmreError};
pub use grid::{average, forward_difference, Grid, NoiseModel, Signal, Transform};
pub use metrics::{bregman_sym, count_local_maxima, ise_iae, MetricReport};
pub use operators::{gaussian_kernel, sigma_from_fwhm, GaussianKernel, LinearOperator};
pub use projections::{
    dykstra, dykstra_warm, project_ball, project_band, project_group, DykstraReport, DykstraState,
};
pub use prox::{prox, prox_l1, prox_tautstring, prox_tv1beta, prox_tv2, ProxResult, Regularizer};
pub use quantiles::{
    per_scale_constants, simulate_global_quantile, QuantileTable, TableKind, TableSpec,
};
pub use windows::{partition_disjoint, Partition, Window, WindowSystem};
