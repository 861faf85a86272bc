//! Closed sets with exact projectors.
//!
//! Every variant of [`SetDescriptor`] has a closed-form nearest-point map, so
//! membership, distance, reflection and proximal normals are all exact up to
//! roundoff. Projections onto nonconvex sets may be multi-valued; the
//! [`ProjectionResult`] keeps the full nearest-point set when it is finite and
//! a deterministic selection in every case.

mod affine;
mod parabola;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

pub use affine::{
    complement_basis, orthonormalize, project_onto_span, AffineSubspace, GRAM_SCHMIDT_DROP_TOL,
    ORTHONORMAL_TOL,
};
pub use sampling::{proximal_normal_sample, proximal_normal_sample_in, sample_ball, ProximalNormal};

/// Points closer than this to a sphere's center are treated as equidistant
/// from the whole sphere.
pub const SPHERE_CENTER_TOL: f64 = 1e-12;

/// Tolerance used when deciding that two projection candidates are tied.
const TIE_TOL: f64 = 1e-10;

/// Tagged description of a closed subset of ℝ^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub enum SetDescriptor {
    AffineSubspace(AffineSubspace),
    /// `{x : <normal, x> <= offset}`
    HalfSpace { normal: Vector, offset: f64 },
    /// `{x : lo <= <normal, x> <= hi}`
    Slab { normal: Vector, lo: f64, hi: f64 },
    Ball { center: Vector, radius: f64 },
    Sphere { center: Vector, radius: f64 },
    Box { lo: Vector, hi: Vector },
    /// `{(x1, x2) : x2 <= -a x1^2}` in ℝ².
    ParabolaHypograph { a: f64 },
    /// Image of `inner` under `z ↦ rotation · z + translation`.
    Transformed {
        inner: Box<SetDescriptor>,
        rotation: Vec<Vec<f64>>,
        translation: Vector,
    },
}

/// Wire form of [`SetDescriptor`]; validated on conversion.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SetSpec {
    AffineSubspace {
        base_point: Vector,
        #[serde(default)]
        directions: Vec<Vector>,
    },
    HalfSpace { normal: Vector, offset: f64 },
    Slab { normal: Vector, lo: f64, hi: f64 },
    Ball { center: Vector, radius: f64 },
    Sphere { center: Vector, radius: f64 },
    Box { lo: Vector, hi: Vector },
    ParabolaHypograph { a: f64 },
    Transformed {
        inner: Box<SetSpec>,
        rotation: Vec<Vec<f64>>,
        translation: Vector,
    },
}

impl TryFrom<SetSpec> for SetDescriptor {
    type Error = Error;

    fn try_from(spec: SetSpec) -> Result<Self> {
        match spec {
            SetSpec::AffineSubspace { base_point, directions } => {
                Ok(SetDescriptor::AffineSubspace(AffineSubspace::new(base_point, &directions)?))
            }
            SetSpec::HalfSpace { normal, offset } => SetDescriptor::half_space(normal, offset),
            SetSpec::Slab { normal, lo, hi } => SetDescriptor::slab(normal, lo, hi),
            SetSpec::Ball { center, radius } => SetDescriptor::ball(center, radius),
            SetSpec::Sphere { center, radius } => SetDescriptor::sphere(center, radius),
            SetSpec::Box { lo, hi } => SetDescriptor::bounding_box(lo, hi),
            SetSpec::ParabolaHypograph { a } => SetDescriptor::parabola_hypograph(a),
            SetSpec::Transformed { inner, rotation, translation } => {
                SetDescriptor::transformed(SetDescriptor::try_from(*inner)?, rotation, translation)
            }
        }
    }
}

impl From<SetDescriptor> for SetSpec {
    fn from(set: SetDescriptor) -> Self {
        match set {
            SetDescriptor::AffineSubspace(l) => SetSpec::AffineSubspace {
                base_point: l.base_point().clone(),
                directions: l.directions().to_vec(),
            },
            SetDescriptor::HalfSpace { normal, offset } => SetSpec::HalfSpace { normal, offset },
            SetDescriptor::Slab { normal, lo, hi } => SetSpec::Slab { normal, lo, hi },
            SetDescriptor::Ball { center, radius } => SetSpec::Ball { center, radius },
            SetDescriptor::Sphere { center, radius } => SetSpec::Sphere { center, radius },
            SetDescriptor::Box { lo, hi } => SetSpec::Box { lo, hi },
            SetDescriptor::ParabolaHypograph { a } => SetSpec::ParabolaHypograph { a },
            SetDescriptor::Transformed { inner, rotation, translation } => SetSpec::Transformed {
                inner: Box::new(SetSpec::from(*inner)),
                rotation,
                translation,
            },
        }
    }
}

/// Shape of a nearest-point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    Unique,
    /// All nearest points, in lexicographic order.
    Finite(Vec<Vector>),
    /// Infinitely many nearest points (a sphere seen from its center).
    Continuum,
}

/// Nearest-point set of a point together with a deterministic selection.
///
/// The same shape is used for reflections, in which case the candidates are
/// `2a - x` and `distance` is `‖R x - x‖`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub selected: Vector,
    pub multiplicity: Multiplicity,
    pub distance: f64,
}

impl ProjectionResult {
    fn unique(x: &Vector, p: Vector) -> Self {
        let distance = x.dist(&p);
        Self { selected: p, multiplicity: Multiplicity::Unique, distance }
    }

    /// Keeps the minimizers among `candidates`; ties are ordered
    /// lexicographically and the smallest one is selected.
    fn from_candidates(x: &Vector, candidates: Vec<Vector>) -> Self {
        let best = candidates.iter().map(|c| x.dist(c)).fold(f64::INFINITY, f64::min);
        let mut ties: Vec<Vector> = candidates
            .into_iter()
            .filter(|c| x.dist(c) <= best + TIE_TOL * best.max(1.0))
            .collect();
        ties.sort_by(|a, b| a.lex_cmp(b));
        ties.dedup_by(|a, b| a.dist(b) <= 1e-12);
        if ties.len() == 1 {
            Self::unique(x, ties.pop().unwrap())
        } else {
            Self {
                selected: ties[0].clone(),
                multiplicity: Multiplicity::Finite(ties),
                distance: best,
            }
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self.multiplicity, Multiplicity::Unique)
    }

    /// Every enumerable candidate: the finite list, or just the selection for
    /// unique and continuum results.
    pub fn candidates(&self) -> Vec<Vector> {
        match &self.multiplicity {
            Multiplicity::Finite(list) => list.clone(),
            _ => vec![self.selected.clone()],
        }
    }

    fn map(self, f: impl Fn(&Vector) -> Vector, distance: f64) -> Self {
        let multiplicity = match self.multiplicity {
            Multiplicity::Finite(list) => Multiplicity::Finite(list.iter().map(&f).collect()),
            other => other,
        };
        Self { selected: f(&self.selected), multiplicity, distance }
    }
}

/// Limiting normal cone of one of the built-in sets at one of its points.
#[derive(Clone, Debug, PartialEq)]
pub enum NormalCone {
    Zero,
    /// `{t r : t >= 0}` with `r` a unit vector.
    Ray(Vector),
    /// A linear subspace with an orthonormal basis.
    Subspace(Vec<Vector>),
}

impl NormalCone {
    pub fn is_zero(&self) -> bool {
        match self {
            NormalCone::Zero => true,
            NormalCone::Subspace(b) => b.is_empty(),
            NormalCone::Ray(_) => false,
        }
    }

    fn mapped(self, f: impl Fn(&Vector) -> Vector) -> Self {
        match self {
            NormalCone::Zero => NormalCone::Zero,
            NormalCone::Ray(r) => NormalCone::Ray(f(&r)),
            NormalCone::Subspace(b) => NormalCone::Subspace(b.iter().map(f).collect()),
        }
    }
}

fn check_unit(normal: &Vector) -> Result<()> {
    if (normal.norm() - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(Error::InvalidSet(format!(
            "normal {normal} must have unit norm (got {})",
            normal.norm()
        )));
    }
    Ok(())
}

fn check_scalar(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!("{name} must be finite")))
    }
}

impl SetDescriptor {
    pub fn affine(base_point: Vector, directions: &[Vector]) -> Result<Self> {
        Ok(SetDescriptor::AffineSubspace(AffineSubspace::new(base_point, directions)?))
    }

    pub fn half_space(normal: Vector, offset: f64) -> Result<Self> {
        check_unit(&normal)?;
        check_scalar("offset", offset)?;
        Ok(SetDescriptor::HalfSpace { normal, offset })
    }

    pub fn slab(normal: Vector, lo: f64, hi: f64) -> Result<Self> {
        check_unit(&normal)?;
        check_scalar("lo", lo)?;
        check_scalar("hi", hi)?;
        if lo > hi {
            return Err(Error::InvalidSet(format!("slab bounds lo={lo} > hi={hi}")));
        }
        Ok(SetDescriptor::Slab { normal, lo, hi })
    }

    /// `{x : lo <= <n, x> <= hi}` for an arbitrary nonzero `n`; the normal is
    /// rescaled to unit length and the bounds with it.
    pub fn slab_from_normal(normal: Vector, lo: f64, hi: f64) -> Result<Self> {
        let n = normal.norm();
        if n == 0.0 {
            return Err(Error::InvalidSet("slab normal must be nonzero".into()));
        }
        SetDescriptor::slab(normal.scale(1.0 / n), lo / n, hi / n)
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius {radius} must be positive")));
        }
        Ok(SetDescriptor::Ball { center, radius })
    }

    pub fn sphere(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("sphere radius {radius} must be positive")));
        }
        Ok(SetDescriptor::Sphere { center, radius })
    }

    pub fn bounding_box(lo: Vector, hi: Vector) -> Result<Self> {
        hi.check_dim(lo.dim())?;
        if lo.coords().iter().zip(hi.coords()).any(|(l, h)| l > h) {
            return Err(Error::InvalidSet("box requires lo <= hi componentwise".into()));
        }
        Ok(SetDescriptor::Box { lo, hi })
    }

    pub fn parabola_hypograph(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidSet(format!("parabola coefficient {a} must be positive")));
        }
        Ok(SetDescriptor::ParabolaHypograph { a })
    }

    /// Rigid-motion wrapper; `rotation` is given by rows and must be
    /// orthogonal to within 1e-10.
    pub fn transformed(inner: SetDescriptor, rotation: Vec<Vec<f64>>, translation: Vector) -> Result<Self> {
        let d = inner.dim();
        translation.check_dim(d)?;
        if rotation.len() != d || rotation.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidSet(format!("rotation must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-10 || !dot.is_finite() {
                    return Err(Error::InvalidSet("rotation is not orthogonal".into()));
                }
            }
        }
        Ok(SetDescriptor::Transformed { inner: Box::new(inner), rotation, translation })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            SetDescriptor::AffineSubspace(l) => l.ambient_dim(),
            SetDescriptor::HalfSpace { normal, .. } | SetDescriptor::Slab { normal, .. } => normal.dim(),
            SetDescriptor::Ball { center, .. } | SetDescriptor::Sphere { center, .. } => center.dim(),
            SetDescriptor::Box { lo, .. } => lo.dim(),
            SetDescriptor::ParabolaHypograph { .. } => 2,
            SetDescriptor::Transformed { translation, .. } => translation.dim(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            SetDescriptor::Sphere { .. } => false,
            SetDescriptor::Transformed { inner, .. } => inner.is_convex(),
            _ => true,
        }
    }

    /// Whether the set is an affine subspace (possibly wrapped).
    pub fn is_affine(&self) -> bool {
        match self {
            SetDescriptor::AffineSubspace(_) => true,
            SetDescriptor::Slab { lo, hi, .. } => lo == hi,
            SetDescriptor::Transformed { inner, .. } => inner.is_affine(),
            _ => false,
        }
    }

    /// Whether the set is an intersection of finitely many half-spaces and
    /// hyperplanes.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            SetDescriptor::AffineSubspace(_)
            | SetDescriptor::HalfSpace { .. }
            | SetDescriptor::Slab { .. }
            | SetDescriptor::Box { .. } => true,
            SetDescriptor::Transformed { inner, .. } => inner.is_polyhedral(),
            _ => false,
        }
    }

    fn check(&self, x: &Vector) -> Result<()> {
        x.check_dim(self.dim())
    }

    /// `rotation · z`
    fn rotate(rotation: &[Vec<f64>], z: &Vector) -> Vector {
        Vector::from_raw(rotation.iter().map(|row| row.iter().zip(z.coords()).map(|(r, c)| r * c).sum()).collect())
    }

    /// `rotationᵀ · y`
    fn rotate_back(rotation: &[Vec<f64>], y: &Vector) -> Vector {
        let d = y.dim();
        Vector::from_raw(
            (0..d)
                .map(|j| (0..d).map(|k| rotation[k][j] * y[k]).sum())
                .collect(),
        )
    }

    pub fn project(&self, x: &Vector) -> Result<ProjectionResult> {
        self.check(x)?;
        Ok(match self {
            SetDescriptor::AffineSubspace(l) => ProjectionResult::unique(x, l.project(x)),
            SetDescriptor::HalfSpace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                let p = if excess > 0.0 { x.axpy(-excess, normal) } else { x.clone() };
                ProjectionResult::unique(x, p)
            }
            SetDescriptor::Slab { normal, lo, hi } => {
                let s = normal.dot(x);
                let p = if s > *hi {
                    x.axpy(hi - s, normal)
                } else if s < *lo {
                    x.axpy(lo - s, normal)
                } else {
                    x.clone()
                };
                ProjectionResult::unique(x, p)
            }
            SetDescriptor::Ball { center, radius } => {
                let rel = x - center;
                let n = rel.norm();
                let p = if n <= *radius { x.clone() } else { center.axpy(radius / n, &rel) };
                ProjectionResult::unique(x, p)
            }
            SetDescriptor::Sphere { center, radius } => {
                let rel = x - center;
                let n = rel.norm();
                if n <= SPHERE_CENTER_TOL {
                    let selected = center.axpy(*radius, &Vector::unit(x.dim(), 0));
                    ProjectionResult { selected, multiplicity: Multiplicity::Continuum, distance: *radius }
                } else {
                    ProjectionResult::unique(x, center.axpy(radius / n, &rel))
                }
            }
            SetDescriptor::Box { lo, hi } => {
                let p = x
                    .coords()
                    .iter()
                    .zip(lo.coords().iter().zip(hi.coords()))
                    .map(|(c, (l, h))| c.clamp(*l, *h))
                    .collect();
                ProjectionResult::unique(x, Vector::from_raw(p))
            }
            SetDescriptor::ParabolaHypograph { a } => {
                let (x1, x2) = (x[0], x[1]);
                if x2 <= -a * x1 * x1 {
                    ProjectionResult::unique(x, x.clone())
                } else {
                    let candidates = parabola::boundary_candidates(*a, x1, x2)
                        .into_iter()
                        .map(|p| Vector::from_raw(p.to_vec()))
                        .collect();
                    ProjectionResult::from_candidates(x, candidates)
                }
            }
            SetDescriptor::Transformed { inner, rotation, translation } => {
                let z = Self::rotate_back(rotation, &(x - translation));
                let res = inner.project(&z)?;
                let distance = res.distance;
                res.map(|p| &Self::rotate(rotation, p) + translation, distance)
            }
        })
    }

    /// Reflection `2 P_S x - x` with the same candidate structure and
    /// selection as [`SetDescriptor::project`].
    pub fn reflect(&self, x: &Vector) -> Result<ProjectionResult> {
        let proj = self.project(x)?;
        let distance = 2.0 * proj.distance;
        Ok(proj.map(|a| x.reflect_through(a), distance))
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            // exact formulas avoid the roundoff of `‖x - P x‖`
            SetDescriptor::HalfSpace { normal, offset } => (normal.dot(x) - offset).max(0.0),
            SetDescriptor::Slab { normal, lo, hi } => {
                let s = normal.dot(x);
                (s - hi).max(lo - s).max(0.0)
            }
            SetDescriptor::Sphere { center, radius } => (x.dist(center) - radius).abs(),
            SetDescriptor::Ball { center, radius } => (x.dist(center) - radius).max(0.0),
            _ => self.project(x)?.distance,
        })
    }

    /// `d_S(x) <= tol`
    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tol} must be nonnegative")));
        }
        Ok(self.distance(x)? <= tol)
    }

    /// The smallest affine subspace containing the set.
    pub fn affine_hull(&self) -> AffineSubspace {
        match self {
            SetDescriptor::AffineSubspace(l) => l.clone(),
            SetDescriptor::Slab { normal, lo, hi } if lo == hi => {
                let base = normal.scale(*lo);
                let dirs = complement_basis(std::slice::from_ref(normal), normal.dim());
                AffineSubspace::from_orthonormal(base, dirs).expect("complement basis is orthonormal")
            }
            SetDescriptor::HalfSpace { normal, offset } => {
                AffineSubspace::full_space(normal.scale(*offset))
            }
            SetDescriptor::Slab { normal, lo, .. } => AffineSubspace::full_space(normal.scale(*lo)),
            SetDescriptor::Ball { center, .. } | SetDescriptor::Sphere { center, .. } => {
                AffineSubspace::full_space(center.clone())
            }
            SetDescriptor::Box { lo, hi } => {
                let d = lo.dim();
                let dirs = (0..d).filter(|&i| lo[i] < hi[i]).map(|i| Vector::unit(d, i)).collect();
                AffineSubspace::from_orthonormal(lo.clone(), dirs).expect("unit vectors are orthonormal")
            }
            SetDescriptor::ParabolaHypograph { .. } => AffineSubspace::full_space(Vector::zeros(2)),
            SetDescriptor::Transformed { inner, rotation, translation } => {
                let h = inner.affine_hull();
                let base = &Self::rotate(rotation, h.base_point()) + translation;
                h.mapped(base, |v| Self::rotate(rotation, v))
            }
        }
    }

    /// Limiting normal cone at `w`, which must lie in the set to within
    /// `tol`. Boundary tests use the same tolerance.
    ///
    /// Box corners where several non-degenerate faces are active have a
    /// polyhedral cone that is neither a ray nor a subspace; they are reported
    /// as unsupported.
    pub fn normal_cone(&self, w: &Vector, tol: f64) -> Result<NormalCone> {
        if !self.contains(w, tol)? {
            return Err(Error::InvalidArgument(format!("point {w} is not in the set")));
        }
        Ok(match self {
            SetDescriptor::AffineSubspace(l) => NormalCone::Subspace(l.normal_basis()),
            SetDescriptor::HalfSpace { normal, offset } => {
                if (normal.dot(w) - offset).abs() <= tol {
                    NormalCone::Ray(normal.clone())
                } else {
                    NormalCone::Zero
                }
            }
            SetDescriptor::Slab { normal, lo, hi } => {
                let s = normal.dot(w);
                if hi - lo <= tol {
                    NormalCone::Subspace(vec![normal.clone()])
                } else if (s - hi).abs() <= tol {
                    NormalCone::Ray(normal.clone())
                } else if (s - lo).abs() <= tol {
                    NormalCone::Ray(normal.scale(-1.0))
                } else {
                    NormalCone::Zero
                }
            }
            SetDescriptor::Ball { center, radius } => {
                let rel = w - center;
                if (rel.norm() - radius).abs() <= tol {
                    NormalCone::Ray(rel.normalized().expect("boundary point differs from center"))
                } else {
                    NormalCone::Zero
                }
            }
            SetDescriptor::Sphere { center, .. } => {
                NormalCone::Subspace(vec![(w - center).normalized().expect("sphere point differs from center")])
            }
            SetDescriptor::Box { lo, hi } => {
                let d = lo.dim();
                let mut lines = Vec::new();
                let mut rays = Vec::new();
                for i in 0..d {
                    if hi[i] - lo[i] <= tol {
                        lines.push(Vector::unit(d, i));
                    } else if (w[i] - hi[i]).abs() <= tol {
                        rays.push(Vector::unit(d, i));
                    } else if (w[i] - lo[i]).abs() <= tol {
                        rays.push(Vector::unit(d, i).scale(-1.0));
                    }
                }
                match (lines.is_empty(), rays.len()) {
                    (true, 0) => NormalCone::Zero,
                    (true, 1) => NormalCone::Ray(rays.pop().unwrap()),
                    (false, 0) => NormalCone::Subspace(lines),
                    _ => {
                        return Err(Error::Unsupported(
                            "box normal cone at a corner is not a ray or subspace".into(),
                        ))
                    }
                }
            }
            SetDescriptor::ParabolaHypograph { a } => {
                if (w[1] + a * w[0] * w[0]).abs() <= tol {
                    NormalCone::Ray(Vector::from_raw(vec![2.0 * a * w[0], 1.0]).normalized().unwrap())
                } else {
                    NormalCone::Zero
                }
            }
            SetDescriptor::Transformed { inner, rotation, translation } => {
                let z = Self::rotate_back(rotation, &(w - translation));
                inner.normal_cone(&z, tol)?.mapped(|v| Self::rotate(rotation, v))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::vector;
    use std::f64::consts::SQRT_2;

    fn x_axis_2d() -> SetDescriptor {
        SetDescriptor::affine(vector(&[0.0, 0.0]), &[vector(&[1.0, 0.0])]).unwrap()
    }

    fn unit_ball() -> SetDescriptor {
        SetDescriptor::ball(vector(&[0.0, 0.0]), 1.0).unwrap()
    }

    fn unit_circle() -> SetDescriptor {
        SetDescriptor::sphere(vector(&[0.0, 0.0]), 1.0).unwrap()
    }

    #[test]
    fn contains_examples() {
        assert!(unit_ball().contains(&vector(&[0.0, 0.0]), 0.0).unwrap());
        assert!(!unit_circle().contains(&vector(&[0.0, 0.0]), 0.0).unwrap());
        let parabola = SetDescriptor::parabola_hypograph(1.0).unwrap();
        assert!(parabola.contains(&vector(&[0.0, -1.0]), 0.0).unwrap());
        assert!(unit_ball().contains(&vector(&[0.0, 0.0]), -1.0).is_err());
    }

    #[test]
    fn project_examples() {
        let p = x_axis_2d().project(&vector(&[3.0, 4.0])).unwrap();
        assert_eq!(p.selected, vector(&[3.0, 0.0]));
        assert!(p.is_unique());

        let p = unit_circle().project(&vector(&[2.0, 0.0])).unwrap();
        assert_eq!(p.selected, vector(&[1.0, 0.0]));
        assert!(p.is_unique());

        let p = SetDescriptor::parabola_hypograph(1.0).unwrap().project(&vector(&[0.0, 1.0])).unwrap();
        assert!(p.selected.dist(&vector(&[0.0, 0.0])) < 1e-15);
        assert!(p.is_unique());

        let p = unit_circle().project(&vector(&[0.0, 0.0])).unwrap();
        assert_eq!(p.selected, vector(&[1.0, 0.0]));
        assert_eq!(p.multiplicity, Multiplicity::Continuum);
        assert_eq!(p.distance, 1.0);
    }

    #[test]
    fn near_center_counts_as_continuum() {
        let p = unit_circle().project(&vector(&[1e-13, 0.0])).unwrap();
        assert_eq!(p.multiplicity, Multiplicity::Continuum);
        let p = unit_circle().project(&vector(&[1e-11, 0.0])).unwrap();
        assert!(p.is_unique());
    }

    #[test]
    fn reflect_examples() {
        let r = x_axis_2d().reflect(&vector(&[3.0, 4.0])).unwrap();
        assert_eq!(r.selected, vector(&[3.0, -4.0]));
        let inside = vector(&[0.3, -0.2]);
        assert_eq!(unit_ball().reflect(&inside).unwrap().selected, inside);
        assert_eq!(unit_ball().reflect(&vector(&[2.0, 0.0])).unwrap().selected, vector(&[0.0, 0.0]));
        // continuum selection reflects through center + e1
        let r = unit_circle().reflect(&vector(&[0.0, 0.0])).unwrap();
        assert_eq!(r.selected, vector(&[2.0, 0.0]));
        assert_eq!(r.multiplicity, Multiplicity::Continuum);
    }

    #[test]
    fn distance_examples() {
        let slab = SetDescriptor::slab(vector(&[0.0, 1.0]), 0.0, 1.0).unwrap();
        assert_eq!(slab.distance(&vector(&[5.0, 3.0])).unwrap(), 2.0);
        assert_eq!(unit_circle().distance(&vector(&[0.0, 0.0])).unwrap(), 1.0);
        let b = SetDescriptor::bounding_box(vector(&[0.0, 0.0]), vector(&[1.0, 1.0])).unwrap();
        assert!((b.distance(&vector(&[2.0, 2.0])).unwrap() - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = unit_ball().project(&vector(&[1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3 }));
        assert!(unit_ball().contains(&vector(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn affine_hull_examples() {
        let l = x_axis_2d();
        assert_eq!(l.affine_hull(), match &l {
            SetDescriptor::AffineSubspace(a) => a.clone(),
            _ => unreachable!(),
        });
        let s = SetDescriptor::sphere(vector(&[0.0, 0.0, 0.0]), 1.0).unwrap();
        assert!(s.affine_hull().is_full());
        let b = SetDescriptor::bounding_box(vector(&[0.0, 0.0]), vector(&[1.0, 0.0])).unwrap();
        let h = b.affine_hull();
        assert_eq!(h.dim(), 1);
        assert!(h.distance(&vector(&[7.0, 0.0])) < 1e-15);
        assert!((h.distance(&vector(&[7.0, 2.0])) - 2.0).abs() < 1e-15);
        let flat = SetDescriptor::slab(vector(&[0.0, 1.0]), 2.0, 2.0).unwrap();
        let h = flat.affine_hull();
        assert_eq!(h.dim(), 1);
        assert!(h.distance(&vector(&[-3.0, 2.0])) < 1e-15);
    }

    #[test]
    fn constructor_validation() {
        assert!(SetDescriptor::half_space(vector(&[1.0, 1.0]), 0.0).is_err());
        assert!(SetDescriptor::slab(vector(&[1.0, 0.0]), 1.0, 0.0).is_err());
        assert!(SetDescriptor::ball(vector(&[0.0]), 0.0).is_err());
        assert!(SetDescriptor::sphere(vector(&[0.0]), -1.0).is_err());
        assert!(SetDescriptor::bounding_box(vector(&[0.0, 1.0]), vector(&[1.0, 0.0])).is_err());
        assert!(SetDescriptor::parabola_hypograph(0.0).is_err());
        let skew = vec![vec![1.0, 0.5], vec![0.0, 1.0]];
        assert!(SetDescriptor::transformed(unit_ball(), skew, vector(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn slab_from_normal_rescales() {
        let s = SetDescriptor::slab_from_normal(vector(&[-1.0, 1.0]), 0.0, 1.0).unwrap();
        match &s {
            SetDescriptor::Slab { normal, lo, hi } => {
                assert!((normal.norm() - 1.0).abs() < 1e-15);
                assert_eq!(*lo, 0.0);
                assert!((hi - 1.0 / SQRT_2).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        // (0, 1) satisfies x2 - x1 = 1, on the upper face
        assert!(s.distance(&vector(&[0.0, 1.0])).unwrap() < 1e-15);
        assert!(s.distance(&vector(&[0.0, 1.1])).unwrap() > 0.0);
    }

    #[test]
    fn transformed_parabola_matches_manual_mapping() {
        // rotate the hypograph by 90 degrees and shift it
        let rot = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        let t = vector(&[1.0, 2.0]);
        let s = SetDescriptor::transformed(SetDescriptor::parabola_hypograph(1.0).unwrap(), rot, t).unwrap();
        // inner point (0, 1) maps to (-1, 0) + (1, 2) = (0, 2); its foot (0,0) maps to (1, 2)
        let p = s.project(&vector(&[0.0, 2.0])).unwrap();
        assert!(p.selected.dist(&vector(&[1.0, 2.0])) < 1e-14);
        assert!((p.distance - 1.0).abs() < 1e-14);
        assert!(s.contains(&vector(&[2.0, 2.0]), 0.0).unwrap());
    }

    #[test]
    fn json_format() {
        let s: SetDescriptor = serde_json::from_str(r#"{"type": "sphere", "center": [0,0], "radius": 1.0}"#).unwrap();
        assert_eq!(s, unit_circle());
        let text = serde_json::to_string(&unit_circle()).unwrap();
        assert_eq!(text, r#"{"type":"sphere","center":[0.0,0.0],"radius":1.0}"#);
        let slab: SetDescriptor =
            serde_json::from_str(r#"{"type":"slab","normal":[0,1],"lo":0,"hi":1}"#).unwrap();
        assert!(matches!(slab, SetDescriptor::Slab { .. }));
        let t: SetDescriptor = serde_json::from_str(
            r#"{"type":"transformed","inner":{"type":"parabola_hypograph","a":2},"rotation":[[1,0],[0,1]],"translation":[0,0]}"#,
        )
        .unwrap();
        assert!(t.is_convex());
        assert!(serde_json::from_str::<SetDescriptor>(r#"{"type":"ball","center":[0],"radius":-1}"#).is_err());
        assert!(serde_json::from_str::<SetDescriptor>(r#"{"type":"half_space","normal":[2,0],"offset":0}"#).is_err());
    }

    #[test]
    fn convexity_flags() {
        assert!(!unit_circle().is_convex());
        assert!(unit_ball().is_convex());
        assert!(SetDescriptor::parabola_hypograph(1.0).unwrap().is_convex());
        assert!(x_axis_2d().is_convex());
    }

    #[test]
    fn normal_cones() {
        let w = vector(&[0.5, 3f64.sqrt() / 2.0]);
        match unit_circle().normal_cone(&w, 1e-12).unwrap() {
            NormalCone::Subspace(b) => assert!((b[0].dot(&w) - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let h = SetDescriptor::half_space(vector(&[0.0, -1.0]), 0.0).unwrap();
        assert_eq!(h.normal_cone(&vector(&[3.0, 0.0]), 1e-12).unwrap(), NormalCone::Ray(vector(&[0.0, -1.0])));
        assert_eq!(h.normal_cone(&vector(&[3.0, 1.0]), 1e-12).unwrap(), NormalCone::Zero);
        let p = SetDescriptor::parabola_hypograph(1.0).unwrap();
        assert_eq!(p.normal_cone(&vector(&[0.0, 0.0]), 1e-12).unwrap(), NormalCone::Ray(vector(&[0.0, 1.0])));
        let b = SetDescriptor::bounding_box(vector(&[0.0, 0.0]), vector(&[1.0, 1.0])).unwrap();
        assert!(matches!(b.normal_cone(&vector(&[1.0, 1.0]), 1e-12), Err(Error::Unsupported(_))));
        assert!(h.normal_cone(&vector(&[0.0, -1.0]), 1e-12).is_err());
    }
}
