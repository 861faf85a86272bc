//! Regularity of a pair of sets at a common point `w`.
//!
//! The CQ-number `θ̄ = max{⟨u, v⟩ : u ∈ N_A(w) ∩ 𝔹, v ∈ -N_B(w) ∩ 𝔹}` is
//! computed exactly for the cones of the built-in sets and estimated from
//! proximal normals otherwise. The remaining quantities (linear regularity
//! modulus, superregularity constants, quasi firm nonexpansiveness) are
//! sampled. Sampled values are empirical, not certified.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dr::{check_pair, dr_step};
use crate::error::{Error, Result};
use crate::intersection::IntersectionOracle;
use crate::reduction::affine_hull_union;
use crate::sets::{
    orthonormalize, proximal_normal_sample_in, sample_ball, AffineSubspace,
    NormalCone, ProximalNormal, SetDescriptor,
};
use crate::vector::Vector;

/// Membership tolerance for the reference point `w`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Default amount added to an estimated `θ̄` before it enters a rate bound.
pub const DEFAULT_THETA_MARGIN: f64 = 0.02;
/// Singular values below this count as zero when intersecting subspaces.
const NULL_TOL: f64 = 1e-10;
/// Points with `max(d_A, d_B)` below this are skipped by the modulus estimate.
const DISTANCE_FLOOR: f64 = 1e-12;
/// Chords shorter than this fraction of the probe radius are skipped by the
/// superregularity probe.
const CHORD_FLOOR_REL: f64 = 1e-4;
/// Samples with `‖x - x̄‖` at or below this are skipped by the quasi firm
/// nonexpansiveness check.
const QFNE_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    ClosedForm,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateVariant {
    #[serde(rename = "general")]
    General,
    /// `A` is an affine subspace.
    #[serde(rename = "affine_A")]
    AffineA,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub theta_bar: f64,
    pub theta_source: ThetaSource,
    pub mu: f64,
    #[serde(rename = "eps_A")]
    pub eps_a: f64,
    #[serde(rename = "eps_B")]
    pub eps_b: f64,
    pub delta: f64,
    pub w: Vector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    #[serde(rename = "eps_A")]
    pub eps_a: f64,
    #[serde(rename = "eps_B")]
    pub eps_b: f64,
    pub theta: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub kappa_sq: f64,
    pub kappa: Option<f64>,
    pub feasible: bool,
    pub variant: RateVariant,
    pub inputs: RateInputs,
}

/// `γ = (1 + (1+2ε_A)²(1+2ε_B)²)/2`.
pub fn quasi_fne_gamma(eps_a: f64, eps_b: f64) -> f64 {
    let p = (1.0 + 2.0 * eps_a) * (1.0 + 2.0 * eps_b);
    (1.0 + p * p) / 2.0
}

/// R-linear rate bound from regularity constants.
///
/// `General`: `κ² = γ - (1-θ)/(5μ²)`. `AffineA`: `κ² = γ - (1-θ)/μ²`.
pub fn kappa_bound(eps_a: f64, eps_b: f64, theta: f64, mu: f64, variant: RateVariant) -> Result<RateBound> {
    if !(eps_a >= 0.0 && eps_b >= 0.0 && eps_a.is_finite() && eps_b.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps values must be finite and >= 0 (got {eps_a}, {eps_b})")));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta must lie in [0, 1) (got {theta})")));
    }
    if !(mu >= 1.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be finite and >= 1 (got {mu})")));
    }
    Ok(rate_formula(eps_a, eps_b, theta, mu, variant))
}

fn rate_formula(eps_a: f64, eps_b: f64, theta: f64, mu: f64, variant: RateVariant) -> RateBound {
    let gain = (1.0 - theta) / (mu * mu);
    let kappa_sq = quasi_fne_gamma(eps_a, eps_b)
        - match variant {
            RateVariant::General => gain / 5.0,
            RateVariant::AffineA => gain,
        };
    let feasible = (0.0..1.0).contains(&kappa_sq);
    RateBound {
        kappa_sq,
        kappa: feasible.then(|| kappa_sq.sqrt()),
        feasible,
        variant,
        inputs: RateInputs { eps_a, eps_b, theta, mu },
    }
}

/// [`kappa_bound`] for a `θ` that may have reached 1. No `θ ∈ (θ̄, 1)`
/// exists then, and the bound comes back as `κ² = γ >= 1`, infeasible.
pub fn kappa_bound_saturating(
    eps_a: f64,
    eps_b: f64,
    theta: f64,
    mu: f64,
    variant: RateVariant,
) -> Result<RateBound> {
    if theta >= 1.0 {
        kappa_bound(eps_a, eps_b, 0.0, mu, variant)?;
        return Ok(rate_formula(eps_a, eps_b, 1.0, mu, variant));
    }
    kappa_bound(eps_a, eps_b, theta, mu, variant)
}

/// Radius `δ(1-κ)/2` of the ball around `w` from which convergence at rate
/// `κ` is guaranteed.
pub fn prescribe_radius(delta: f64, kappa: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) || !(0.0..1.0).contains(&kappa) {
        return Err(Error::InvalidArgument(format!(
            "prescribed radius needs delta > 0 and kappa in [0, 1) (got {delta}, {kappa})"
        )));
    }
    Ok(delta * (1.0 - kappa) / 2.0)
}

fn matrix_of(basis: &[Vector]) -> DMatrix<f64> {
    let d = basis[0].dim();
    DMatrix::from_fn(d, basis.len(), |i, j| basis[j][i])
}

fn max_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// CQ-number of two cones, `max ⟨u, v⟩` over unit-ball elements `u ∈ N_A`,
/// `v ∈ -N_B`. For two subspaces this is the cosine of the smallest principal
/// angle between them.
pub fn cone_cq_number(na: &NormalCone, nb: &NormalCone) -> f64 {
    if na.is_zero() || nb.is_zero() {
        return 0.0;
    }
    let theta = match (na, nb) {
        (NormalCone::Ray(r), NormalCone::Ray(s)) => (-r.dot(s)).max(0.0),
        (NormalCone::Ray(r), NormalCone::Subspace(v)) | (NormalCone::Subspace(v), NormalCone::Ray(r)) => {
            v.iter().map(|q| q.dot(r).powi(2)).sum::<f64>().sqrt()
        }
        (NormalCone::Subspace(u), NormalCone::Subspace(v)) => {
            max_singular_value(&(matrix_of(u).transpose() * matrix_of(v)))
        }
        _ => unreachable!("zero cones handled above"),
    };
    theta.clamp(0.0, 1.0)
}

/// `N ∩ span(directions)` for an orthonormal `directions`.
pub fn restrict_cone(cone: &NormalCone, directions: &[Vector]) -> NormalCone {
    let inside = |v: &Vector| {
        let p = directions.iter().fold(Vector::zeros(v.dim()), |acc, q| acc.axpy(q.dot(v), q));
        (v - &p).norm() <= NULL_TOL
    };
    match cone {
        NormalCone::Zero => NormalCone::Zero,
        NormalCone::Ray(r) => {
            if inside(r) {
                NormalCone::Ray(r.clone())
            } else {
                NormalCone::Zero
            }
        }
        NormalCone::Subspace(basis) if basis.is_empty() => NormalCone::Zero,
        NormalCone::Subspace(basis) => {
            let q = matrix_of(basis);
            let d = q.nrows();
            let proj = if directions.is_empty() {
                DMatrix::zeros(d, d)
            } else {
                let dm = matrix_of(directions);
                &dm * dm.transpose()
            };
            let residual = (DMatrix::identity(d, d) - proj) * &q;
            let svd = residual.svd(false, true);
            let v_t = svd.v_t.expect("right singular vectors requested");
            let kept: Vec<Vector> = svd
                .singular_values
                .iter()
                .enumerate()
                .filter(|(_, s)| **s <= NULL_TOL)
                .map(|(i, _)| {
                    let coeffs = v_t.row(i);
                    basis.iter().zip(coeffs.iter()).fold(Vector::zeros(d), |acc, (b, c)| acc.axpy(*c, b))
                })
                .collect();
            let kept = orthonormalize(&kept);
            if kept.is_empty() {
                NormalCone::Zero
            } else {
                NormalCone::Subspace(kept)
            }
        }
    }
}

fn check_reference(a: &SetDescriptor, b: &SetDescriptor, w: &Vector) -> Result<()> {
    check_pair(a, b, w)?;
    if a.contains(w, MEMBERSHIP_TOL)? && b.contains(w, MEMBERSHIP_TOL)? {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("reference point {w} is not in A ∩ B")))
    }
}

fn check_probe(delta: f64, count: usize) -> Result<()> {
    if delta > 0.0 && delta.is_finite() && count > 0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("probe needs delta > 0 and count >= 1 (got {delta}, {count})")))
    }
}

/// Exact `θ̄` from the limiting normal cones at `w`. With `restricted_to`,
/// both cones are first intersected with the direction space of that affine
/// subspace.
pub fn cq_number_closed_form(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    restricted_to: Option<&AffineSubspace>,
) -> Result<f64> {
    check_reference(a, b, w)?;
    let mut na = a.normal_cone(w, MEMBERSHIP_TOL)?;
    let mut nb = b.normal_cone(w, MEMBERSHIP_TOL)?;
    if let Some(l) = restricted_to {
        w.check_dim(l.ambient_dim())?;
        na = restrict_cone(&na, l.directions());
        nb = restrict_cone(&nb, l.directions());
    }
    Ok(cone_cq_number(&na, &nb))
}

fn substream(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Proximal normals of `a` with feet in `𝔹_{2δ}(w)` and of `b` with feet in
/// `𝔹_{3δ}(w)`, each sorted by distance of the foot to `w`.
fn local_normals(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    delta: f64,
    count: usize,
    seed: u64,
    restricted_to: Option<&AffineSubspace>,
) -> Result<(Vec<ProximalNormal>, Vec<ProximalNormal>)> {
    check_reference(a, b, w)?;
    check_probe(delta, count)?;
    let gather = |set: &SetDescriptor, radius: f64, k: u64| -> Result<Vec<ProximalNormal>> {
        let mut pairs = proximal_normal_sample_in(set, w, radius, count, substream(seed, k), restricted_to)?;
        pairs.retain(|p| p.foot.dist(w) <= radius);
        pairs.sort_by(|p, q| p.foot.dist(w).total_cmp(&q.foot.dist(w)));
        Ok(pairs)
    };
    let na = gather(a, 2.0 * delta, 0)?;
    let nb = gather(b, 3.0 * delta, 1)?;
    if na.is_empty() || nb.is_empty() {
        return Err(Error::NoSamples("no proximal normal pairs near the reference point".into()));
    }
    Ok((na, nb))
}

fn max_pairing(na: &[ProximalNormal], nb: &[ProximalNormal]) -> f64 {
    let unit = |p: &ProximalNormal| p.normal.normalized().expect("sampled normals are nonzero");
    let ua: Vec<Vector> = na.iter().map(unit).collect();
    let ub: Vec<Vector> = nb.iter().map(unit).collect();
    let mut best = 0.0f64;
    for u in &ua {
        for v in &ub {
            best = best.max(-u.dot(v));
        }
    }
    best.clamp(0.0, 1.0)
}

/// Sampled `θ̄`. Normals are drawn at feet in `A ∩ 𝔹_{2δ}(w)` and
/// `B ∩ 𝔹_{3δ}(w)`; only the `⌈√n⌉` feet closest to `w` on each side enter
/// the maximum of `⟨u/‖u‖, -v/‖v‖⟩`, so the estimate localizes at `w` as the
/// count grows. With `restricted_to`, samples are drawn inside that affine
/// subspace and normals projected onto its direction space.
pub fn cq_number_sampled(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    delta: f64,
    count: usize,
    seed: u64,
    restricted_to: Option<&AffineSubspace>,
) -> Result<f64> {
    let (na, nb) = local_normals(a, b, w, delta, count, seed, restricted_to)?;
    let nearest = |n: usize| (n as f64).sqrt().ceil() as usize;
    Ok(max_pairing(&na[..nearest(na.len())], &nb[..nearest(nb.len())]))
}

/// Smallest `θ` with `⟨ζ_1, ζ_2⟩ >= -θ‖ζ_1‖‖ζ_2‖` over all sampled proximal
/// normals at feet in `A ∩ 𝔹_{2δ}(w)` and `B ∩ 𝔹_{3δ}(w)`.
pub fn scale_cq_number(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    delta: f64,
    count: usize,
    seed: u64,
) -> Result<f64> {
    let (na, nb) = local_normals(a, b, w, delta, count, seed, None)?;
    Ok(max_pairing(&na, &nb))
}

/// Largest radius among `deltas` up to which the sampled angle condition
/// with constant `theta` holds at every tested radius. Not a certified radius.
pub fn angle_condition_radius(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    theta: f64,
    deltas: &[f64],
    count: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut found = None;
    for delta in sorted {
        if scale_cq_number(a, b, w, delta, count, seed)? > theta {
            break;
        }
        found = Some(delta);
    }
    Ok(found)
}

/// Sampled linear regularity modulus: the largest
/// `d_{A∩B}(x) / max(d_A(x), d_B(x))` over points of `𝔹_{2δ}(w)`, floored
/// at 1.
pub fn linear_regularity_modulus(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    delta: f64,
    count: usize,
    seed: u64,
    oracle: &IntersectionOracle,
) -> Result<f64> {
    check_pair(a, b, w)?;
    check_probe(delta, count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = 1.0f64;
    for x in sample_ball(w, 2.0 * delta, count, &mut rng, None) {
        let gap = a.distance(&x)?.max(b.distance(&x)?);
        if gap < DISTANCE_FLOOR {
            continue;
        }
        mu = mu.max(oracle.distance(&x)? / gap);
    }
    Ok(mu)
}

/// Sampled superregularity constant of `s` at `w` on `𝔹_δ(w)`: the largest
/// `⟨u, z - x⟩ / (‖u‖‖z - x‖)` over proximal normals `u` at feet `x` and
/// points `z` of the set, all within `δ` of `w`, floored at 0.
pub fn superregularity_probe(s: &SetDescriptor, w: &Vector, delta: f64, count: usize, seed: u64) -> Result<f64> {
    w.check_dim(s.dim())?;
    check_probe(delta, count)?;
    if !s.contains(w, MEMBERSHIP_TOL)? {
        return Err(Error::InvalidArgument(format!("reference point {w} is not in the set")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![w.clone()];
    let mut normals = Vec::new();
    for x in sample_ball(w, delta, count, &mut rng, None) {
        let proj = s.project(&x)?;
        if proj.distance <= DISTANCE_FLOOR {
            points.push(x);
            continue;
        }
        if proj.selected.dist(w) > delta {
            continue;
        }
        let normal = (&x - &proj.selected).normalized().expect("positive distance");
        points.push(proj.selected.clone());
        normals.push((proj.selected, normal));
    }
    let distinct = points.iter().skip(1).any(|p| p.dist(w) > CHORD_FLOOR_REL * delta);
    if !distinct {
        return Err(Error::NoSamples("fewer than two distinct points of the set near the reference point".into()));
    }
    let floor = CHORD_FLOOR_REL * delta;
    let mut eps = 0.0f64;
    for (foot, u) in &normals {
        for z in &points {
            let chord = z - foot;
            let len = chord.norm();
            if len > floor {
                eps = eps.max(u.dot(&chord) / len);
            }
        }
    }
    Ok(if eps > 0.0 { eps } else { 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiFneCheck {
    /// Largest `(‖x - x⁺‖² + ‖x⁺ - x̄‖²) / ‖x - x̄‖²` over the samples.
    pub gamma_hat: f64,
    /// `γ(ε_A, ε_B)`.
    pub gamma_bound: f64,
    /// `gamma_hat <= gamma_bound + 1e-6`
    pub holds: bool,
}

/// Samples `x ∈ 𝔹_δ(w)` and compares `‖x - x⁺‖² + ‖x⁺ - x̄‖²` with
/// `‖x - x̄‖²`, `x̄` the nearest intersection point.
#[allow(clippy::too_many_arguments)]
pub fn quasi_fne_check(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    delta: f64,
    eps_a: f64,
    eps_b: f64,
    count: usize,
    seed: u64,
    oracle: &IntersectionOracle,
) -> Result<QuasiFneCheck> {
    check_reference(a, b, w)?;
    check_probe(delta, count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma_hat = 0.0f64;
    for x in sample_ball(w, delta, count, &mut rng, None) {
        let xbar = oracle.nearest(&x)?;
        let base = x.dist(&xbar);
        if base <= QFNE_FLOOR {
            continue;
        }
        let step = dr_step(a, b, &x)?;
        let lhs = step.residual.powi(2) + step.x_next.dist(&xbar).powi(2);
        gamma_hat = gamma_hat.max(lhs / (base * base));
    }
    let gamma_bound = quasi_fne_gamma(eps_a, eps_b);
    Ok(QuasiFneCheck { gamma_hat, gamma_bound, holds: gamma_hat <= gamma_bound + 1e-6 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOptions {
    pub delta: f64,
    pub count: usize,
    pub seed: u64,
    pub theta_margin: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self { delta: 0.1, count: 2000, seed: 42, theta_margin: DEFAULT_THETA_MARGIN }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub kappa_sq: f64,
    pub feasible: bool,
}

impl From<&RateBound> for BoundSummary {
    fn from(b: &RateBound) -> Self {
        Self { kappa_sq: b.kappa_sq, feasible: b.feasible }
    }
}

/// Regularity report of a pair at a reference point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub theta_bar: f64,
    pub theta_source: ThetaSource,
    /// `θ̄` with both cones restricted to `aff(A ∪ B)`.
    pub restricted_theta: f64,
    pub mu: f64,
    #[serde(rename = "eps_A")]
    pub eps_a: f64,
    #[serde(rename = "eps_B")]
    pub eps_b: f64,
    pub delta: f64,
    pub gamma_hat: f64,
    /// `θ` fed to the bounds: restricted `θ̄` plus the margin, at most 1.
    pub theta_used: f64,
    pub kappa_general: BoundSummary,
    #[serde(rename = "kappa_affineA")]
    pub kappa_affine_a: Option<BoundSummary>,
    pub prescribed_radius: Option<f64>,
    pub strongly_regular: bool,
    pub affine_hull_regular: bool,
    pub certified: bool,
}

fn theta_with_source(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    opts: &DiagnoseOptions,
    restricted_to: Option<&AffineSubspace>,
) -> Result<(f64, ThetaSource)> {
    match cq_number_closed_form(a, b, w, restricted_to) {
        Ok(t) => Ok((t, ThetaSource::ClosedForm)),
        Err(Error::Unsupported(_)) => Ok((
            cq_number_sampled(a, b, w, opts.delta, opts.count, opts.seed, restricted_to)?,
            ThetaSource::Sampled,
        )),
        Err(e) => Err(e),
    }
}

/// Runs every estimator at `w` and assembles the rate bounds.
///
/// `ε_A` is probed on `𝔹_{2δ}(w)`, `ε_B` on `𝔹_{3δ}(w)`, `μ` on `𝔹_{2δ}(w)`.
/// The bounds use the `θ̄` restricted to `aff(A ∪ B)`, which coincides with
/// the unrestricted one when the hull is the whole space.
pub fn diagnose(
    a: &SetDescriptor,
    b: &SetDescriptor,
    w: &Vector,
    opts: &DiagnoseOptions,
    oracle: &IntersectionOracle,
) -> Result<(RegularityEstimate, Diagnostics)> {
    check_reference(a, b, w)?;
    check_probe(opts.delta, opts.count)?;
    let (theta_bar, theta_source) = theta_with_source(a, b, w, opts, None)?;
    let hull = affine_hull_union(a, b)?.hull;
    let restricted_theta = if hull.is_full() {
        theta_bar
    } else {
        theta_with_source(a, b, w, opts, Some(&hull))?.0
    };
    let mu = linear_regularity_modulus(a, b, w, opts.delta, opts.count, substream(opts.seed, 2), oracle)?;
    let eps_a = superregularity_probe(a, w, 2.0 * opts.delta, opts.count, substream(opts.seed, 3))?;
    let eps_b = superregularity_probe(b, w, 3.0 * opts.delta, opts.count, substream(opts.seed, 4))?;
    let gamma_hat =
        quasi_fne_check(a, b, w, opts.delta, eps_a, eps_b, opts.count, substream(opts.seed, 5), oracle)?.gamma_hat;
    let theta_used = (restricted_theta + opts.theta_margin).min(1.0);
    let general = kappa_bound_saturating(eps_a, eps_b, theta_used, mu, RateVariant::General)?;
    let affine = if a.is_affine() {
        Some(kappa_bound_saturating(eps_a, eps_b, theta_used, mu, RateVariant::AffineA)?)
    } else {
        None
    };
    let prescribed_radius = general.kappa.map(|k| prescribe_radius(opts.delta, k)).transpose()?;
    let estimate = RegularityEstimate { theta_bar, theta_source, mu, eps_a, eps_b, delta: opts.delta, w: w.clone() };
    let diagnostics = Diagnostics {
        theta_bar,
        theta_source,
        restricted_theta,
        mu,
        eps_a,
        eps_b,
        delta: opts.delta,
        gamma_hat,
        theta_used,
        kappa_general: (&general).into(),
        kappa_affine_a: affine.as_ref().map(Into::into),
        prescribed_radius,
        strongly_regular: theta_bar < 1.0,
        affine_hull_regular: restricted_theta < 1.0,
        certified: false,
    };
    Ok((estimate, diagnostics))
}
