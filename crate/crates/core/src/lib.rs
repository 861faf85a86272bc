//! Douglas-Rachford feasibility toolkit.
//!
//! Solves `find x ∈ A ∩ B` for two closed sets with the Douglas-Rachford
//! iteration `x⁺ = P_B(2a - x) + x - a`, `a ∈ P_A x`, and provides the
//! surrounding analysis: reduction to the affine hull `aff(A ∪ B)`, regularity
//! estimates (CQ-number, linear regularity modulus, superregularity), the
//! closed-form R-linear rate bounds, and empirical rate fits.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod vector;
pub mod sets;
pub mod intersection;
pub mod dr;
pub mod reduction;
pub mod regularity;
pub mod rate;
pub mod harness;

pub use error::{Error, Result};
pub use intersection::IntersectionOracle;
pub use sets::{AffineSubspace, Multiplicity, NormalCone, ProjectionResult, SetDescriptor};
pub use vector::{vector, Vector};
