//! Empirical R-linear rates of DR runs and checks against explicit bounds.

use serde::{Deserialize, Serialize};

use crate::dr::Trajectory;
use crate::error::{Error, Result};
use crate::intersection::IntersectionOracle;
use crate::vector::Vector;

/// Errors at or below this are roundoff and never enter a fit.
pub const ERROR_FLOOR: f64 = 1e-13;
/// Smallest number of points a fit is run on.
pub const MIN_FIT_POINTS: usize = 5;
/// Smallest number of points a fit of a finitely terminating sequence is
/// run on.
pub const MIN_FINITE_POINTS: usize = 2;
/// Additive slack of the bound check.
pub const BOUND_SLACK: f64 = 1e-9;
/// Steps with `d_{A∩B}(x_n)` at or below this are skipped by
/// [`per_step_contraction`].
const CONTRACTION_FLOOR: f64 = 1e-12;

/// Least-squares fit of `log e_n ≈ log C + n log κ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricFit {
    pub kappa: f64,
    /// Smallest `C` with `e_n <= C κⁿ` for every `n`.
    pub c: f64,
    /// Index of the first error used by the regression.
    pub tail_start: usize,
    pub r_squared: f64,
    /// The sequence dropped to the floor after fewer than
    /// [`MIN_FIT_POINTS`] usable errors.
    pub finite_termination: bool,
}

/// Fits a geometric envelope to an error sequence.
///
/// The regression runs on the last `tail_fraction` of the errors above
/// [`ERROR_FLOOR`] (at least [`MIN_FIT_POINTS`] of them). The constant is
/// then raised so that the envelope covers the whole sequence.
///
/// A sequence that reaches the floor and stays there is R-linear with every
/// rate. With fewer than [`MIN_FIT_POINTS`] usable errors it is fitted over
/// all of them (at least [`MIN_FINITE_POINTS`]) and flagged
/// `finite_termination`.
pub fn fit_geometric(errors: &[f64], tail_fraction: f64) -> Result<GeometricFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("tail fraction must lie in (0, 1] (got {tail_fraction})")));
    }
    let usable: Vec<usize> = (0..errors.len()).filter(|&n| errors[n] > ERROR_FLOOR).collect();
    let terminated = usable.last().is_some_and(|&n| n + 1 < errors.len())
        && usable.iter().enumerate().all(|(i, &n)| i == n);
    let finite_termination = usable.len() < MIN_FIT_POINTS && terminated;
    let needed = if finite_termination { MIN_FINITE_POINTS } else { MIN_FIT_POINTS };
    if usable.len() < needed {
        return Err(Error::TooFewPoints { found: usable.len(), needed });
    }
    let take = if finite_termination {
        usable.len()
    } else {
        ((tail_fraction * usable.len() as f64).ceil() as usize).clamp(MIN_FIT_POINTS, usable.len())
    };
    let tail = &usable[usable.len() - take..];
    let xs: Vec<f64> = tail.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&n| errors[n].ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let kappa = slope.exp();
    if !(kappa < 1.0) {
        return Err(Error::NonContracting { kappa });
    }
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    let mut c = errors
        .iter()
        .enumerate()
        .map(|(n, e)| e / kappa.powi(n as i32))
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    // the quotient can round down, leaving `C κⁿ` an ulp short of `e_n`
    for (n, e) in errors.iter().enumerate() {
        while c * kappa.powi(n as i32) < *e && c.is_finite() {
            c = c.next_up();
        }
    }
    Ok(GeometricFit { kappa, c, tail_start: tail[0], r_squared, finite_termination })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub kappa_emp: f64,
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
    pub tail_start: usize,
    pub r_squared: f64,
    pub limit_used: Vector,
    pub finite_termination: bool,
}

fn limit_of(traj: &Trajectory) -> Result<&Vector> {
    match (&traj.limit_estimate, traj.converged()) {
        (Some(limit), true) => Ok(limit),
        _ => Err(Error::NotConverged(traj.stop_reason.to_string())),
    }
}

/// `‖x_n - x̄‖` for every iterate, `x̄` the run's limit estimate.
pub fn limit_errors(traj: &Trajectory) -> Result<Vec<f64>> {
    let limit = limit_of(traj)?;
    Ok(traj.iterates().iter().map(|x| x.dist(limit)).collect())
}

/// R-linear fit `‖x_n - x̄‖ <= C κⁿ` of a converged run.
pub fn fit_rlinear(traj: &Trajectory, tail_fraction: f64) -> Result<RateFit> {
    let fit = fit_geometric(&limit_errors(traj)?, tail_fraction)?;
    Ok(RateFit {
        kappa_emp: fit.kappa,
        c_emp: fit.c,
        tail_start: fit.tail_start,
        r_squared: fit.r_squared,
        limit_used: limit_of(traj)?.clone(),
        finite_termination: fit.finite_termination,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub passed: bool,
    /// Largest `e_n / bound_n`.
    pub max_ratio: f64,
}

/// Checks `e_n <= C κⁿ + 1e-9` for every `n`, returning the largest ratio
/// `e_n / (C κⁿ)`.
pub fn check_geometric_bound(errors: &[f64], c: f64, kappa: f64) -> BoundCheck {
    let mut passed = true;
    let mut max_ratio = 0.0f64;
    for (n, e) in errors.iter().enumerate() {
        let bound = c * kappa.powi(n as i32);
        passed &= *e <= bound + BOUND_SLACK;
        if bound > 0.0 {
            max_ratio = max_ratio.max(e / bound);
        } else if *e > 0.0 {
            max_ratio = f64::INFINITY;
        }
    }
    BoundCheck { passed, max_ratio }
}

/// Checks the Fejér-type envelope `‖x_n - x̄‖ <= ‖x_0 - w‖(1+κ)/(1-κ) κⁿ`.
pub fn verify_fejer_rate_bound(traj: &Trajectory, w: &Vector, kappa: f64) -> Result<BoundCheck> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::InvalidArgument(format!("kappa must lie in [0, 1) (got {kappa})")));
    }
    w.check_dim(traj.x0().dim())?;
    let c = traj.x0().dist(w) * (1.0 + kappa) / (1.0 - kappa);
    Ok(check_geometric_bound(&limit_errors(traj)?, c, kappa))
}

/// Per-step ratios `‖x_{n+1} - P_Ω x_n‖ / d_Ω(x_n)` with `Ω = A ∩ B`, for
/// steps whose start is not already in `Ω`.
pub fn per_step_contraction(traj: &Trajectory, oracle: &IntersectionOracle) -> Result<Vec<f64>> {
    let mut ratios = Vec::new();
    for step in &traj.steps {
        let nearest = oracle.nearest(&step.x)?;
        let d = step.x.dist(&nearest);
        if d > CONTRACTION_FLOOR {
            ratios.push(step.x_next.dist(&nearest) / d);
        }
    }
    Ok(ratios)
}

/// Rate section of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub kappa_emp: f64,
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
    pub r_squared: f64,
    pub kappa_certified: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub max_ratio: Option<f64>,
    pub finite_termination: bool,
}

impl RateReport {
    pub fn new(fit: &RateFit, kappa_certified: Option<f64>, check: Option<BoundCheck>) -> Self {
        Self {
            kappa_emp: fit.kappa_emp,
            c_emp: fit.c_emp,
            r_squared: fit.r_squared,
            kappa_certified,
            bound_satisfied: check.map(|c| c.passed),
            max_ratio: check.map(|c| c.max_ratio),
            finite_termination: fit.finite_termination,
        }
    }
}
