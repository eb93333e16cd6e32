//! Desk-scale numerics for the heat equation `u_t - u_xx - mu/delta^2 u = f` on
//! the unit interval, where `delta` is the distance to the boundary.
//!
//! The crate is organized by the object being computed:
//!
//! * [`mesh`]: uniform grid, distance function, control/observation regions.
//! * [`operator`]: regularized singular operator, implicit time stepping and the
//!   exact discrete adjoint.
//! * [`hardy`]: discrete Hardy-Poincaré constants as generalized eigenproblems.
//! * [`spectral`]: ground state of the regularized operator and its blow-up.
//! * [`cost`]: optimal stabilization cost and its analytic lower bound.
//! * [`carleman`]: Carleman weight construction and pointwise/integral checks.
//! * [`hum`]: penalized HUM null controls and observability estimates.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod cg;
pub mod cost;
pub mod error;
pub mod hardy;
pub mod hum;
pub mod mesh;
pub mod operator;
pub mod spectral;
pub mod tridiag;

pub use error::{Error, Result};
pub use mesh::{Interval, Mesh1D, RegionMasks};
pub use operator::{OperatorSpec, Regularization, TimeGrid, TridiagOperator};

/// The critical Hardy constant for the distance-to-boundary weight.
pub const MU_STAR: f64 = 0.25;
