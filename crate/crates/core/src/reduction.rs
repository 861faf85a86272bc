//! Reduction of a DR run to the affine hull `L = aff(A ∪ B)`.
//!
//! `P_L` commutes with both reflectors when `A, B ⊆ L`, so the shadows
//! `y_n = P_L x_n` form a DR sequence inside `L` and the orthogonal part
//! `x_n - y_n` never changes. Everything here checks those identities on
//! concrete runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dr::{dr_step, Trajectory};
use crate::error::{Error, Result};
use crate::sets::{complement_basis, orthonormalize, sample_ball, AffineSubspace, SetDescriptor};
use crate::vector::Vector;

/// Largest tolerated drift of the orthogonal offset.
pub const OFFSET_TOL: f64 = 1e-8;
/// Per-step tolerance (relative to `max(1, ‖y_n‖)`) for the reduced sequence
/// to count as a DR sequence.
pub const REDUCED_STEP_TOL: f64 = 1e-9;

/// `L = aff(A ∪ B)` and an orthonormal basis of its orthogonal complement.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineHullPair {
    pub hull: AffineSubspace,
    pub offset_basis: Vec<Vector>,
}

/// Computes `aff(A ∪ B)` from the exact affine hulls of the two sets:
/// base point of `aff A`, directions spanning both hulls' directions and the
/// vector joining their base points.
pub fn affine_hull_union(a: &SetDescriptor, b: &SetDescriptor) -> Result<AffineHullPair> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let ha = a.affine_hull();
    let hb = b.affine_hull();
    let join = hb.base_point() - ha.base_point();
    let spanning: Vec<Vector> = ha
        .directions()
        .iter()
        .chain(hb.directions())
        .cloned()
        .chain(std::iter::once(join))
        .collect();
    let directions = orthonormalize(&spanning);
    let offset_basis = complement_basis(&directions, a.dim());
    let hull = AffineSubspace::from_orthonormal(ha.base_point().clone(), directions)?;
    Ok(AffineHullPair { hull, offset_basis })
}

/// Largest `d_L` over `count` points of each set obtained by projecting
/// random points from a ball of the given radius around each hull's base
/// point. Stays at roundoff level when `A, B ⊆ L`.
pub fn hull_containment_gap(
    pair: &AffineHullPair,
    a: &SetDescriptor,
    b: &SetDescriptor,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for set in [a, b] {
        let base = set.affine_hull().base_point().clone();
        for x in sample_ball(&base, radius, count, &mut rng, None) {
            let p = set.project(&x)?.selected;
            worst = worst.max(pair.hull.distance(&p));
        }
    }
    Ok(worst)
}

/// The shadow sequence `y_n = P_L x_n` of a run together with the checks.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTrajectory {
    pub iterates: Vec<Vector>,
    /// `x_0 - y_0`
    pub offset: Vector,
    /// `‖(x_n - y_n) - (x_0 - y_0)‖` per iterate.
    pub offset_check: Vec<f64>,
    /// `‖y_{n+1} - x⁺(y_n)‖` where `x⁺(y_n)` is a fresh DR step from `y_n`.
    pub step_mismatch: Vec<f64>,
    /// Whether every step mismatch is within [`REDUCED_STEP_TOL`].
    pub dr_consistent: bool,
    /// `max_n |‖y_n - ȳ‖ - ‖x_n - x̄‖|` with `ȳ = P_L x̄`, for converged runs.
    pub rate_transfer_deviation: Option<f64>,
}

impl ReducedTrajectory {
    pub fn max_offset_deviation(&self) -> f64 {
        self.offset_check.iter().copied().fold(0.0, f64::max)
    }
}

/// Projects every iterate onto `hull` and checks that the offset is constant
/// and that the projected sequence is itself a DR sequence for `(A, B)`.
///
/// Offset drift beyond [`OFFSET_TOL`] cannot happen for sets inside `hull`
/// and is returned as [`Error::ReductionViolation`]. Step mismatches are only
/// reported: on multi-valued projections the reduced path may follow a
/// different branch.
pub fn reduce_trajectory(
    traj: &Trajectory,
    a: &SetDescriptor,
    b: &SetDescriptor,
    hull: &AffineSubspace,
) -> Result<ReducedTrajectory> {
    if traj.steps.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let xs = traj.iterates();
    let ys: Vec<Vector> = xs.iter().map(|x| hull.project(x)).collect();
    let offset = &xs[0] - &ys[0];
    let offset_check: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - y).dist(&offset))
        .collect();
    if let Some((step, &deviation)) = offset_check
        .iter()
        .enumerate()
        .find(|(_, &d)| d > OFFSET_TOL)
    {
        return Err(Error::ReductionViolation { step, deviation });
    }
    let mut step_mismatch = Vec::with_capacity(ys.len() - 1);
    let mut dr_consistent = true;
    for n in 0..ys.len() - 1 {
        let fresh = dr_step(a, b, &ys[n])?.x_next;
        let gap = fresh.dist(&ys[n + 1]);
        if gap > REDUCED_STEP_TOL * ys[n].norm().max(1.0) {
            dr_consistent = false;
        }
        step_mismatch.push(gap);
    }
    let rate_transfer_deviation = traj.limit_estimate.as_ref().map(|xbar| {
        let ybar = hull.project(xbar);
        xs.iter()
            .zip(&ys)
            .map(|(x, y)| (y.dist(&ybar) - x.dist(xbar)).abs())
            .fold(0.0, f64::max)
    });
    Ok(ReducedTrajectory {
        iterates: ys,
        offset,
        offset_check,
        step_mismatch,
        dr_consistent,
        rate_transfer_deviation,
    })
}

/// Shadows of a DR limit against the closed form `x̄ - (x_0 - P_L x_0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowLimit {
    pub xbar: Vector,
    #[serde(rename = "pA")]
    pub p_a: Vector,
    #[serde(rename = "pB")]
    pub p_b: Vector,
    pub formula_value: Vector,
    /// All three points pairwise within the agreement tolerance.
    pub agree: bool,
    /// `P_A x̄` lies in both sets (to 1e-9).
    pub in_intersection: bool,
}

/// Compares `P_A x̄`, `P_B x̄` and `x̄ - (x_0 - P_L x_0)` for a converged run.
/// Disagreement is a result, not an error.
pub fn shadow_limit_formula(
    traj: &Trajectory,
    hull: &AffineSubspace,
    a: &SetDescriptor,
    b: &SetDescriptor,
    agree_tol: f64,
) -> Result<ShadowLimit> {
    let xbar = traj
        .limit_estimate
        .clone()
        .ok_or_else(|| Error::NotConverged(traj.stop_reason.to_string()))?;
    let p_a = a.project(&xbar)?.selected;
    let p_b = b.project(&xbar)?.selected;
    let x0 = traj.x0();
    let formula_value = &xbar - &(x0 - &hull.project(x0));
    let agree = p_a.dist(&p_b) <= agree_tol
        && p_a.dist(&formula_value) <= agree_tol
        && p_b.dist(&formula_value) <= agree_tol;
    let in_intersection = a.contains(&p_a, 1e-9)? && b.contains(&p_a, 1e-9)?;
    Ok(ShadowLimit { xbar, p_a, p_b, formula_value, agree, in_intersection })
}

/// Wire form of the reduction checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    #[serde(rename = "L_dim")]
    pub l_dim: usize,
    pub offset_norm: f64,
    pub max_offset_deviation: f64,
    pub reduction_ok: bool,
}

impl ReductionReport {
    pub fn new(pair: &AffineHullPair, reduced: &ReducedTrajectory) -> Self {
        let max_offset_deviation = reduced.max_offset_deviation();
        Self {
            l_dim: pair.hull.dim(),
            offset_norm: reduced.offset.norm(),
            max_offset_deviation,
            reduction_ok: max_offset_deviation <= OFFSET_TOL && reduced.dr_consistent,
        }
    }
}
