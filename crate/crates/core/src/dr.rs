//! The Douglas-Rachford iteration.
//!
//! `T x = { P_B(2a - x) + x - a : a ∈ P_A x } = ½(Id + R_B R_A) x`
//!
//! Nonconvex projections can be multi-valued; every step follows the
//! deterministic selection of [`SetDescriptor::project`].

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intersection::IntersectionOracle;
use crate::sets::{sample_ball, SetDescriptor};
use crate::vector::Vector;

/// Iterates with norm above this stop the run as diverged.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// One DR step with all intermediate points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrStep {
    pub x: Vector,
    /// Selected point of `P_A x`.
    pub a: Vector,
    /// `2a - x`
    pub u: Vector,
    /// Selected point of `P_B u`.
    pub b: Vector,
    /// `b + x - a`
    pub x_next: Vector,
    /// `‖x_next - x‖`
    pub residual: f64,
}

impl DrStep {
    /// `½(x + R_B u)`, the reflector form of the same step.
    pub fn x_next_reflector_form(&self) -> Vector {
        let v = self.u.reflect_through(&self.b);
        (&self.x + &v).scale(0.5)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ResidualBelowTol,
    MaxIters,
    Diverged,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::ResidualBelowTol => "residual_below_tol",
            StopReason::MaxIters => "max_iters",
            StopReason::Diverged => "diverged",
        })
    }
}

/// A DR run. `shadows_a[n]` and `shadows_b[n]` are the selected projections
/// of the `n`-th iterate, for every iterate including the last one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<DrStep>,
    pub shadows_a: Vec<Vector>,
    pub shadows_b: Vec<Vector>,
    pub stop_reason: StopReason,
    pub limit_estimate: Option<Vector>,
}

/// Compact run summary written next to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub stop_reason: StopReason,
    pub iters: usize,
    pub final_residual: f64,
    pub limit: Option<Vector>,
}

impl Trajectory {
    pub fn x0(&self) -> &Vector {
        &self.steps[0].x
    }

    pub fn last(&self) -> &Vector {
        &self.steps.last().expect("trajectory has at least one step").x_next
    }

    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::ResidualBelowTol
    }

    /// `x_0, x_1, ..., x_N` (one more than the number of steps).
    pub fn iterates(&self) -> Vec<Vector> {
        let mut xs: Vec<Vector> = self.steps.iter().map(|s| s.x.clone()).collect();
        xs.push(self.last().clone());
        xs
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.residual).collect()
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            stop_reason: self.stop_reason,
            iters: self.steps.len(),
            final_residual: self.steps.last().map_or(0.0, |s| s.residual),
            limit: self.limit_estimate.clone(),
        }
    }

    /// One row per step:
    /// `n,x...,a...,u...,b...,residual,dist_A,dist_B`, where the distances
    /// are those of `x_n` to the two sets.
    pub fn to_csv(&self) -> String {
        let d = self.x0().dim();
        let mut out = String::from("n");
        for name in ["x", "a", "u", "b"] {
            for i in 0..d {
                write!(out, ",{name}{i}").unwrap();
            }
        }
        out.push_str(",residual,dist_A,dist_B\n");
        for (n, s) in self.steps.iter().enumerate() {
            write!(out, "{n}").unwrap();
            for v in [&s.x, &s.a, &s.u, &s.b] {
                for c in v.coords() {
                    write!(out, ",{c}").unwrap();
                }
            }
            let dist_a = s.x.dist(&self.shadows_a[n]);
            let dist_b = s.x.dist(&self.shadows_b[n]);
            writeln!(out, ",{},{dist_a},{dist_b}", s.residual).unwrap();
        }
        out
    }
}

pub(crate) fn check_pair(a: &SetDescriptor, b: &SetDescriptor, x: &Vector) -> Result<()> {
    b.dim().eq(&a.dim()).then_some(()).ok_or(Error::DimensionMismatch {
        expected: a.dim(),
        found: b.dim(),
    })?;
    x.check_dim(a.dim())
}

pub fn dr_step(a: &SetDescriptor, b: &SetDescriptor, x: &Vector) -> Result<DrStep> {
    check_pair(a, b, x)?;
    let pa = a.project(x)?.selected;
    let u = x.reflect_through(&pa);
    let pb = b.project(&u)?.selected;
    let x_next = &(&pb + x) - &pa;
    let residual = x_next.dist(x);
    Ok(DrStep { x: x.clone(), a: pa, u, b: pb, x_next, residual })
}

/// Iterates until the step residual drops to `tol`, `max_iters` steps are
/// taken, or an iterate leaves the divergence guard.
pub fn run(a: &SetDescriptor, b: &SetDescriptor, x0: &Vector, max_iters: usize, tol: f64) -> Result<Trajectory> {
    if max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    check_pair(a, b, x0)?;
    let mut steps = Vec::new();
    let mut shadows_a = Vec::new();
    let mut shadows_b = Vec::new();
    let mut x = x0.clone();
    let mut stop_reason = StopReason::MaxIters;
    for _ in 0..max_iters {
        let step = dr_step(a, b, &x)?;
        shadows_a.push(step.a.clone());
        shadows_b.push(b.project(&x)?.selected);
        let residual = step.residual;
        x = step.x_next.clone();
        steps.push(step);
        if residual <= tol {
            stop_reason = StopReason::ResidualBelowTol;
            break;
        }
        if x.norm() > DIVERGENCE_GUARD || !x.is_finite() {
            stop_reason = StopReason::Diverged;
            break;
        }
    }
    if x.is_finite() {
        shadows_a.push(a.project(&x)?.selected);
        shadows_b.push(b.project(&x)?.selected);
    } else {
        let last = steps.last().expect("at least one step");
        shadows_a.push(last.a.clone());
        shadows_b.push(last.b.clone());
    }
    let limit_estimate = (stop_reason == StopReason::ResidualBelowTol).then(|| x.clone());
    Ok(Trajectory { steps, shadows_a, shadows_b, stop_reason, limit_estimate })
}

/// `min ‖x⁺ - x‖` over every enumerable branch `x⁺ ∈ T x`.
pub fn fixed_point_residual(a: &SetDescriptor, b: &SetDescriptor, x: &Vector) -> Result<f64> {
    check_pair(a, b, x)?;
    let mut best = f64::INFINITY;
    for pa in a.project(x)?.candidates() {
        let u = x.reflect_through(&pa);
        for pb in b.project(&u)?.candidates() {
            let x_next = &(&pb + x) - &pa;
            best = best.min(x_next.dist(x));
        }
    }
    Ok(best)
}

/// Step length against distance to the intersection at sampled points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressProbe {
    /// `(‖x - x⁺‖, d_{A∩B}(x))` per sample.
    pub pairs: Vec<(f64, f64)>,
    /// `min ‖x - x⁺‖ / (d_{A∩B}(x)/√5)` over samples with positive distance.
    pub lambda_hat: Option<f64>,
}

/// Samples with `d_{A∩B}(x)` at or below this are excluded from `lambda_hat`.
pub const PROBE_DISTANCE_FLOOR: f64 = 1e-12;

/// Evaluates the progress pairs at the given points.
pub fn step_progress_at(
    a: &SetDescriptor,
    b: &SetDescriptor,
    points: &[Vector],
    oracle: &IntersectionOracle,
) -> Result<ProgressProbe> {
    let mut pairs = Vec::with_capacity(points.len());
    let mut lambda_hat: Option<f64> = None;
    for x in points {
        let step = dr_step(a, b, x)?;
        let dist = oracle.distance(x)?;
        pairs.push((step.residual, dist));
        if dist > PROBE_DISTANCE_FLOOR {
            let ratio = step.residual / (dist / 5f64.sqrt());
            lambda_hat = Some(lambda_hat.map_or(ratio, |l| l.min(ratio)));
        }
    }
    Ok(ProgressProbe { pairs, lambda_hat })
}

/// Samples `count` points in `B(w, sample_radius)` and compares the step
/// length `‖x - x⁺‖` with `d_{A∩B}(x)`. A sufficient-decrease constant
/// `λ > 0` with `‖x - x⁺‖ >= λ d_{A∩B}(x)/√5` near a regular intersection
/// point shows up as a positive `lambda_hat`.
pub fn step_progress_probe(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    sample_radius: f64,
    count: usize,
    seed: u64,
    oracle: &IntersectionOracle,
) -> Result<ProgressProbe> {
    check_pair(a, b, w)?;
    if !(a.contains(w, 1e-9)? && b.contains(w, 1e-9)?) {
        return Err(Error::InvalidArgument(format!("reference point {w} is not in A ∩ B")));
    }
    if !(sample_radius > 0.0) || count == 0 {
        return Err(Error::InvalidArgument("probe needs sample_radius > 0 and count >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = sample_ball(w, sample_radius, count, &mut rng, None);
    step_progress_at(a, b, &points, oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::vector;

    fn axis(d: usize, i: usize) -> SetDescriptor {
        SetDescriptor::affine(Vector::zeros(d), &[Vector::unit(d, i)]).unwrap()
    }

    fn upper_half_plane() -> SetDescriptor {
        SetDescriptor::half_space(vector(&[0.0, -1.0]), 0.0).unwrap()
    }

    #[test]
    fn same_line_is_fixed_everywhere() {
        // R_L R_L = Id for an affine L, so every point is a fixed point
        let l = axis(2, 0);
        let s = dr_step(&l, &l, &vector(&[3.0, 4.0])).unwrap();
        assert_eq!(s.a, vector(&[3.0, 0.0]));
        assert_eq!(s.u, vector(&[3.0, -4.0]));
        assert_eq!(s.b, vector(&[3.0, 0.0]));
        assert_eq!(s.x_next, vector(&[3.0, 4.0]));
        assert_eq!(s.residual, 0.0);
    }

    #[test]
    fn parabola_fixed_point() {
        let a = upper_half_plane();
        let b = SetDescriptor::parabola_hypograph(1.0).unwrap();
        let s = dr_step(&a, &b, &vector(&[0.0, -1.0])).unwrap();
        assert_eq!(s.a, vector(&[0.0, 0.0]));
        assert_eq!(s.u, vector(&[0.0, 1.0]));
        assert!(s.b.norm() < 1e-15);
        assert!(s.x_next.dist(&vector(&[0.0, -1.0])) < 1e-15);
        assert!(fixed_point_residual(&a, &b, &vector(&[0.0, -1.0])).unwrap() <= 1e-12);
    }

    #[test]
    fn intersection_points_are_fixed_for_convex_sets() {
        let a = SetDescriptor::ball(vector(&[0.0, 0.0]), 1.0).unwrap();
        let b = upper_half_plane();
        let x = vector(&[0.2, 0.3]);
        let s = dr_step(&a, &b, &x).unwrap();
        assert_eq!(s.x_next, x);
        let t = run(&a, &b, &x, 50, 1e-12).unwrap();
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].residual, 0.0);
        assert!(t.converged());
    }

    #[test]
    fn same_ball_converges_in_one_step() {
        let ball = SetDescriptor::ball(vector(&[0.0, 0.0]), 1.0).unwrap();
        let t = run(&ball, &ball, &vector(&[2.0, 0.0]), 100, 1e-12).unwrap();
        assert_eq!(t.steps[0].x_next, vector(&[1.0, 0.0]));
        assert_eq!(t.limit_estimate, Some(vector(&[1.0, 0.0])));
        assert_eq!(t.steps.len(), 2);
    }

    #[test]
    fn crossing_axes_residual() {
        let (a, b) = (axis(2, 0), axis(2, 1));
        let s = dr_step(&a, &b, &vector(&[1.0, 1.0])).unwrap();
        assert_eq!(s.b, vector(&[0.0, -1.0]));
        assert_eq!(s.x_next, vector(&[0.0, 0.0]));
        let r = fixed_point_residual(&a, &b, &vector(&[1.0, 1.0])).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn step_forms_agree() {
        let a = SetDescriptor::sphere(vector(&[0.0, 0.0]), 1.0).unwrap();
        let b = SetDescriptor::sphere(vector(&[1.0, 0.0]), 1.0).unwrap();
        for x in [[0.3, 0.9], [2.0, -1.0], [0.0, 0.0], [-4.0, 7.5]] {
            let s = dr_step(&a, &b, &vector(&x)).unwrap();
            assert!(s.x_next.dist(&s.x_next_reflector_form()) <= 1e-12);
            assert_eq!(s.u, s.x.reflect_through(&s.a));
        }
    }

    #[test]
    fn run_validates_arguments() {
        let l = axis(2, 0);
        assert!(run(&l, &l, &vector(&[0.0, 1.0]), 0, 1e-9).is_err());
        assert!(run(&l, &l, &vector(&[0.0, 1.0]), 10, 0.0).is_err());
        assert!(run(&l, &l, &vector(&[0.0, 1.0, 2.0]), 10, 1e-9).is_err());
        assert!(run(&l, &axis(3, 0), &vector(&[0.0, 1.0]), 10, 1e-9).is_err());
    }

    #[test]
    fn parallel_lines_never_meet() {
        // DR on disjoint parallel lines drifts off linearly
        let a = axis(2, 0);
        let b = SetDescriptor::affine(vector(&[0.0, 1.0]), &[vector(&[1.0, 0.0])]).unwrap();
        let t = run(&a, &b, &vector(&[0.0, 0.0]), 50, 1e-12).unwrap();
        assert_eq!(t.stop_reason, StopReason::MaxIters);
        assert!(t.limit_estimate.is_none());
        assert!((t.last()[1] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn divergence_guard_trips() {
        // iterates move by the line gap every step
        let p = SetDescriptor::affine(vector(&[0.0, 0.0]), &[vector(&[1.0, 0.0])]).unwrap();
        let q = SetDescriptor::affine(vector(&[0.0, 1e11]), &[vector(&[1.0, 0.0])]).unwrap();
        let t = run(&p, &q, &vector(&[0.0, 0.0]), 100, 1e-12).unwrap();
        assert_eq!(t.stop_reason, StopReason::Diverged);
        assert!(t.steps.len() < 100);
    }

    #[test]
    fn csv_layout() {
        let (a, b) = (axis(2, 0), axis(2, 1));
        let t = run(&a, &b, &vector(&[1.0, 1.0]), 10, 1e-12).unwrap();
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "n,x0,x1,a0,a1,u0,u1,b0,b1,residual,dist_A,dist_B");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 12);
        assert_eq!(first[0], "0");
        assert_eq!(first[11], "1");
        assert_eq!(csv.lines().count(), t.steps.len() + 1);
    }

    #[test]
    fn summary_json() {
        let (a, b) = (axis(2, 0), axis(2, 1));
        let t = run(&a, &b, &vector(&[1.0, 1.0]), 10, 1e-12).unwrap();
        let json = serde_json::to_value(t.summary()).unwrap();
        assert_eq!(json["stop_reason"], "residual_below_tol");
        assert_eq!(json["iters"], 2);
        assert_eq!(json["limit"], serde_json::json!([0.0, 0.0]));
    }

    #[test]
    fn probe_excludes_reference_point() {
        let a = SetDescriptor::sphere(vector(&[0.0, 0.0]), 1.0).unwrap();
        let b = SetDescriptor::sphere(vector(&[1.0, 0.0]), 1.0).unwrap();
        let oracle = IntersectionOracle::for_pair(&a, &b, None).unwrap();
        let w = vector(&[0.5, 3f64.sqrt() / 2.0]);
        let probe = step_progress_at(&a, &b, std::slice::from_ref(&w), &oracle).unwrap();
        assert!(probe.pairs[0].0 < 1e-15 && probe.pairs[0].1 < 1e-15);
        assert!(probe.lambda_hat.is_none());
        assert!(step_progress_probe(&a, &b, &vector(&[0.0, 0.0]), 0.1, 10, 1, &oracle).is_err());
    }
}
