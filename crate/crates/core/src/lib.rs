//! Numerical toolkit for small-ball probabilities of sums of independent
//! random vectors with bounded densities.
//!
//! Densities live on regular grids as piecewise-constant functions. On top of
//! that representation the crate provides the spherically symmetric decreasing
//! rearrangement, exact-at-grid-resolution distributions of sums, the extremal
//! uniform-ball bounds together with explicit error budgets, an exact
//! piecewise-polynomial oracle for sums of uniforms on the line, and seeded
//! verification harnesses for the inequalities.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extremal;
pub mod grid;
pub mod oracle1d;
pub mod rearrange;
pub mod report;
pub mod rng;
pub mod sbd;
pub mod sumdist;
pub mod summation;
pub mod verify;

pub mod cli;

pub use error::{Error, Result};
pub use extremal::{
    rogozin_bound_density, rogozin_bound_prob, uniform_ball_density, Bound, ExtremalSum,
    UniformBall,
};
pub use grid::{
    ball_radius_for_volume, ball_volume, centered_ball_mask, GridDensity, GridSpec, RegionMask,
};
pub use oracle1d::{oracle1d_sum_of_uniforms, PiecewisePolynomial};
pub use rearrange::{symmetric_decreasing_rearrangement, verify_rearrangement_properties};
pub use report::VerificationReport;
pub use sumdist::{
    bll_integral, convolve, small_ball_coefficients, small_ball_prob, small_ball_prob_exact,
    sum_density, sum_density_cell_exact, CoefficientMatrix, ConvolutionMethod,
};
