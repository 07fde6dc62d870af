//! Numerical laboratory for stochastic optimal control of diffusions with
//! measurable coefficients.
//!
//! The crate computes value functions of controlled SDEs three ways and
//! cross-checks them:
//!
//! * Monte Carlo over feedback-policy families ([`mc`], [`sde`]),
//! * finite-difference HJB solves by policy iteration ([`elliptic`]) and
//!   monotone time-stepping of the nonlinear semigroup ([`parabolic`]),
//! * regularity / integrability experiments that probe the structural
//!   properties of the value functions ([`analysis`], [`viscosity`]).
//!
//! Everything is deterministic for a fixed seed: batch operations fan out
//! across workers (feature `parallel`) but reduce in fixed index order.

pub mod analysis;
pub mod control;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod mc;
pub mod numeric;
pub mod parabolic;
pub mod parallel;
pub mod presets;
pub mod quadrature;
pub mod sde;
pub mod viscosity;

pub use control::{
    check_ellipticity, hamiltonian, CoefficientField, ControlPoint, ControlSet, Domain,
    ProblemSpec, Variant,
};
pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, NodeClass};
pub use quadrature::{lp_norm, mollify};
pub use sde::{exit_exp_moment, exit_stats, simulate_path, FeedbackPolicy, PathSample, PolicyGrid};
