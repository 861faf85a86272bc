//! Nearest points of `A ∩ B`.
//!
//! Several diagnostics need `d_{A∩B}` and a nearest point of the
//! intersection. Closed forms are used whenever the pair allows it:
//! finite point sets, sphere sections (sphere ∩ sphere, sphere ∩ affine) and
//! polyhedra (exact active-set enumeration). Other convex pairs use Dykstra's
//! algorithm; anything else in ℝ² or ℝ³ falls back to a coarse-to-fine grid
//! search anchored at a known intersection point.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sets::{complement_basis, AffineSubspace, SetDescriptor};
use crate::vector::Vector;

/// Feasibility slack for polyhedral constraints.
const POLY_TOL: f64 = 1e-9;
/// Upper bound on enumerated active sets before switching to Dykstra.
const MAX_ACTIVE_SETS: usize = 100_000;
/// Final grid pitch of the fallback search.
const GRID_PITCH: f64 = 1e-4;

#[derive(Clone, Debug)]
struct Constraint {
    normal: Vector,
    rhs: f64,
    equality: bool,
}

/// `{z : <n_i, z> <= c_i} ∩ {z : <m_j, z> = e_j}`
#[derive(Clone, Debug)]
pub struct Polyhedron {
    dim: usize,
    constraints: Vec<Constraint>,
}

impl Polyhedron {
    pub fn from_sets(sets: &[&SetDescriptor]) -> Result<Self> {
        let dim = sets.first().map(|s| s.dim()).ok_or_else(|| {
            Error::InvalidArgument("polyhedron needs at least one set".into())
        })?;
        let mut constraints = Vec::new();
        for s in sets {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
            }
            push_constraints(s, &mut constraints)?;
        }
        Ok(Self { dim, constraints })
    }

    fn is_feasible(&self, z: &Vector) -> bool {
        self.constraints.iter().all(|c| {
            let s = c.normal.dot(z) - c.rhs;
            if c.equality {
                s.abs() <= POLY_TOL
            } else {
                s <= POLY_TOL
            }
        })
    }

    /// Projection onto `{z : <n_i, z> = c_i for i in rows}`, or `None` if the
    /// system is inconsistent.
    fn project_affine(&self, x: &Vector, rows: &[usize]) -> Option<Vector> {
        if rows.is_empty() {
            return Some(x.clone());
        }
        let m = DMatrix::from_fn(rows.len(), self.dim, |i, j| self.constraints[rows[i]].normal[j]);
        let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.constraints[r].rhs));
        let xv = DVector::from_column_slice(x.coords());
        let pinv = m.clone().pseudo_inverse(1e-12).ok()?;
        let z = &xv - pinv * (&m * &xv - &rhs);
        let resid = (&m * &z - &rhs).amax();
        (resid <= POLY_TOL).then(|| Vector::from_raw(z.iter().copied().collect()))
    }

    /// Number of active sets the exact projection enumerates.
    fn enumeration_size(&self) -> usize {
        let n_ineq = self.constraints.iter().filter(|c| !c.equality).count();
        (0..=self.dim.min(n_ineq)).map(|k| binomial(n_ineq, k)).sum()
    }

    /// Exact Euclidean projection: the closest feasible point among the
    /// projections onto every candidate active set.
    fn project_exact(&self, x: &Vector) -> Result<Vector> {
        let eq: Vec<usize> = (0..self.constraints.len()).filter(|&i| self.constraints[i].equality).collect();
        let ineq: Vec<usize> = (0..self.constraints.len()).filter(|&i| !self.constraints[i].equality).collect();
        let max_active = self.dim.min(ineq.len());
        let mut best: Option<(f64, Vector)> = None;
        for k in 0..=max_active {
            for subset in Combinations::new(ineq.len(), k) {
                let rows: Vec<usize> = eq.iter().copied().chain(subset.iter().map(|&i| ineq[i])).collect();
                if let Some(z) = self.project_affine(x, &rows) {
                    if self.is_feasible(&z) {
                        let d = x.dist(&z);
                        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                            best = Some((d, z));
                        }
                    }
                }
            }
        }
        best.map(|(_, z)| z).ok_or(Error::EmptyIntersection)
    }
}

fn push_constraints(set: &SetDescriptor, out: &mut Vec<Constraint>) -> Result<()> {
    match set {
        SetDescriptor::AffineSubspace(l) => {
            for n in l.normal_basis() {
                let rhs = n.dot(l.base_point());
                out.push(Constraint { normal: n, rhs, equality: true });
            }
        }
        SetDescriptor::HalfSpace { normal, offset } => {
            out.push(Constraint { normal: normal.clone(), rhs: *offset, equality: false });
        }
        SetDescriptor::Slab { normal, lo, hi } => {
            if lo == hi {
                out.push(Constraint { normal: normal.clone(), rhs: *lo, equality: true });
            } else {
                out.push(Constraint { normal: normal.clone(), rhs: *hi, equality: false });
                out.push(Constraint { normal: normal.scale(-1.0), rhs: -lo, equality: false });
            }
        }
        SetDescriptor::Box { lo, hi } => {
            let d = lo.dim();
            for i in 0..d {
                let e = Vector::unit(d, i);
                if lo[i] == hi[i] {
                    out.push(Constraint { normal: e, rhs: lo[i], equality: true });
                } else {
                    out.push(Constraint { normal: e.scale(-1.0), rhs: -lo[i], equality: false });
                    out.push(Constraint { normal: e, rhs: hi[i], equality: false });
                }
            }
        }
        SetDescriptor::Transformed { inner, rotation, translation } => {
            let mut local = Vec::new();
            push_constraints(inner, &mut local)?;
            for c in local {
                // <n, Qᵀ(y - t)> <= c  <=>  <Qn, y> <= c + <Qn, t>
                let qn = Vector::from_raw(
                    rotation.iter().map(|row| row.iter().zip(c.normal.coords()).map(|(r, v)| r * v).sum()).collect(),
                );
                let rhs = c.rhs + qn.dot(translation);
                out.push(Constraint { normal: qn, rhs, equality: c.equality });
            }
        }
        other => {
            return Err(Error::Unsupported(format!("{} is not polyhedral", variant_name(other))));
        }
    }
    Ok(())
}

fn variant_name(set: &SetDescriptor) -> &'static str {
    match set {
        SetDescriptor::AffineSubspace(_) => "affine_subspace",
        SetDescriptor::HalfSpace { .. } => "half_space",
        SetDescriptor::Slab { .. } => "slab",
        SetDescriptor::Ball { .. } => "ball",
        SetDescriptor::Sphere { .. } => "sphere",
        SetDescriptor::Box { .. } => "box",
        SetDescriptor::ParabolaHypograph { .. } => "parabola_hypograph",
        SetDescriptor::Transformed { .. } => "transformed",
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Lexicographic k-subsets of `0..n`.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self { n, idx: (0..k).collect(), done: k > n }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Computes nearest points of `A ∩ B`.
#[derive(Clone, Debug)]
pub enum IntersectionOracle {
    /// A finite intersection.
    Points(Vec<Vector>),
    /// A round sphere of the given radius inside `carrier` (which passes
    /// through `center`). Radius zero is a single point.
    SubSphere { center: Vector, radius: f64, carrier: AffineSubspace },
    Polyhedral(Polyhedron),
    /// Dykstra's alternating projections for a convex pair.
    Dykstra { a: SetDescriptor, b: SetDescriptor },
    /// Coarse-to-fine grid search seeded at a known intersection point.
    Grid { a: SetDescriptor, b: SetDescriptor, anchor: Vector },
}

impl IntersectionOracle {
    pub fn points(points: Vec<Vector>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyIntersection)?;
        for p in &points {
            p.check_dim(first.dim())?;
        }
        Ok(IntersectionOracle::Points(points))
    }

    /// Picks the most exact oracle available for the pair. `anchor`, a known
    /// point of `A ∩ B`, enables the grid fallback.
    pub fn for_pair(a: &SetDescriptor, b: &SetDescriptor, anchor: Option<&Vector>) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
        }
        if a.is_polyhedral() && b.is_polyhedral() {
            let poly = Polyhedron::from_sets(&[a, b])?;
            if poly.enumeration_size() <= MAX_ACTIVE_SETS {
                return Ok(IntersectionOracle::Polyhedral(poly));
            }
        }
        if let Some(oracle) = sphere_section(a, b)?.or(sphere_section(b, a)?) {
            return Ok(oracle);
        }
        if a.is_convex() && b.is_convex() {
            return Ok(IntersectionOracle::Dykstra { a: a.clone(), b: b.clone() });
        }
        match anchor {
            Some(w) if a.dim() <= 3 => {
                w.check_dim(a.dim())?;
                Ok(IntersectionOracle::Grid { a: a.clone(), b: b.clone(), anchor: w.clone() })
            }
            _ => Err(Error::Unsupported(format!(
                "no intersection oracle for {} ∩ {} in dimension {}",
                variant_name(a),
                variant_name(b),
                a.dim()
            ))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            IntersectionOracle::Points(_) => "points",
            IntersectionOracle::SubSphere { .. } => "sub_sphere",
            IntersectionOracle::Polyhedral(_) => "polyhedral",
            IntersectionOracle::Dykstra { .. } => "dykstra",
            IntersectionOracle::Grid { .. } => "grid",
        }
    }

    /// Whether the result is exact up to roundoff.
    pub fn is_exact(&self) -> bool {
        !matches!(self, IntersectionOracle::Grid { .. })
    }

    pub fn nearest(&self, x: &Vector) -> Result<Vector> {
        match self {
            IntersectionOracle::Points(points) => {
                x.check_dim(points[0].dim())?;
                let mut best = &points[0];
                for p in &points[1..] {
                    let (dp, db) = (x.dist(p), x.dist(best));
                    if dp < db || (dp == db && p.lex_cmp(best).is_lt()) {
                        best = p;
                    }
                }
                Ok(best.clone())
            }
            IntersectionOracle::SubSphere { center, radius, carrier } => {
                x.check_dim(center.dim())?;
                if *radius == 0.0 || carrier.dim() == 0 {
                    return Ok(center.clone());
                }
                let rel = &carrier.project(x) - center;
                let dir = match rel.normalized() {
                    Some(u) if rel.norm() > 1e-12 => u,
                    _ => carrier.directions()[0].clone(),
                };
                Ok(center.axpy(*radius, &dir))
            }
            IntersectionOracle::Polyhedral(poly) => {
                x.check_dim(poly.dim)?;
                poly.project_exact(x)
            }
            IntersectionOracle::Dykstra { a, b } => dykstra(a, b, x),
            IntersectionOracle::Grid { a, b, anchor } => grid_search(a, b, anchor, x),
        }
    }

    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Ok(x.dist(&self.nearest(x)?))
    }
}

/// Closed form for `sphere ∩ other` when `other` is a sphere or an affine
/// subspace.
fn sphere_section(s: &SetDescriptor, other: &SetDescriptor) -> Result<Option<IntersectionOracle>> {
    let SetDescriptor::Sphere { center: c1, radius: r1 } = s else {
        return Ok(None);
    };
    let d = c1.dim();
    let (center, radius_sq, carrier) = match other {
        SetDescriptor::AffineSubspace(l) => {
            let foot = l.project(c1);
            let h = c1.dist(&foot);
            (foot.clone(), r1 * r1 - h * h, l.rebased(foot))
        }
        SetDescriptor::Sphere { center: c2, radius: r2 } => {
            let axis = c2 - c1;
            let dist = axis.norm();
            if dist == 0.0 {
                if r1 == r2 {
                    return Err(Error::Unsupported("coincident spheres".into()));
                }
                return Err(Error::EmptyIntersection);
            }
            let u = axis.scale(1.0 / dist);
            let along = (dist * dist + r1 * r1 - r2 * r2) / (2.0 * dist);
            let center = c1.axpy(along, &u);
            let dirs = complement_basis(&[u], d);
            let carrier = AffineSubspace::from_orthonormal(center.clone(), dirs)?;
            (center, r1 * r1 - along * along, carrier)
        }
        _ => return Ok(None),
    };
    let scale = r1 * r1;
    if radius_sq < -1e-12 * scale {
        return Err(Error::EmptyIntersection);
    }
    let radius = radius_sq.max(0.0).sqrt();
    if radius <= 1e-12 * r1 {
        return Ok(Some(IntersectionOracle::Points(vec![center])));
    }
    if carrier.dim() == 1 {
        let u = &carrier.directions()[0];
        let mut pts = vec![center.axpy(-radius, u), center.axpy(radius, u)];
        pts.sort_by(|a, b| a.lex_cmp(b));
        return Ok(Some(IntersectionOracle::Points(pts)));
    }
    Ok(Some(IntersectionOracle::SubSphere { center, radius, carrier }))
}

/// Dykstra's projection algorithm onto `A ∩ B` for convex `A`, `B`.
fn dykstra(a: &SetDescriptor, b: &SetDescriptor, x: &Vector) -> Result<Vector> {
    let d = x.dim();
    let mut z = x.clone();
    let mut p = Vector::zeros(d);
    let mut q = Vector::zeros(d);
    for _ in 0..200_000 {
        let y = a.project(&(&z + &p))?.selected;
        p = &(&z + &p) - &y;
        let z_next = b.project(&(&y + &q))?.selected;
        q = &(&y + &q) - &z_next;
        let change = z_next.dist(&z);
        z = z_next;
        if change <= 1e-15 * (1.0 + z.norm()) && a.distance(&z)? <= 1e-12 {
            return Ok(z);
        }
    }
    if a.distance(&z)? > 1e-8 || b.distance(&z)? > 1e-8 {
        return Err(Error::EmptyIntersection);
    }
    Ok(z)
}

/// Multi-level grid search for the nearest point of `A ∩ B` to `x`,
/// finished by alternating projections. Accuracy is of order the final pitch.
fn grid_search(a: &SetDescriptor, b: &SetDescriptor, anchor: &Vector, x: &Vector) -> Result<Vector> {
    let d = x.dim();
    x.check_dim(a.dim())?;
    let gap = |z: &Vector| -> Result<f64> { Ok(a.distance(z)?.max(b.distance(z)?)) };
    if gap(x)? <= 1e-12 {
        return Ok(x.clone());
    }
    let radius = x.dist(anchor);
    const PER_SIDE: i64 = 20;
    const KEEP: usize = 8;
    let mut centers = vec![(x.clone(), radius)];
    let mut half_width = radius;
    let mut survivors: Vec<Vector> = Vec::new();
    loop {
        let pitch = half_width / PER_SIDE as f64;
        let slack = pitch * (d as f64).sqrt() / 2.0;
        let mut found: Vec<(f64, Vector)> = Vec::new();
        for (c, _) in &centers {
            let mut idx = vec![-PER_SIDE; d];
            'cells: loop {
                let z = Vector::from_raw((0..d).map(|k| c[k] + idx[k] as f64 * pitch).collect());
                if z.dist(x) <= radius + slack && gap(&z)? <= slack {
                    found.push((z.dist(x), z));
                }
                for i in idx.iter_mut() {
                    *i += 1;
                    if *i <= PER_SIDE {
                        continue 'cells;
                    }
                    *i = -PER_SIDE;
                }
                break;
            }
        }
        found.sort_by(|p, q| p.0.total_cmp(&q.0));
        found.truncate(KEEP);
        if found.is_empty() || pitch <= GRID_PITCH {
            survivors.extend(found.into_iter().map(|(_, z)| z));
            break;
        }
        survivors = found.iter().map(|(_, z)| z.clone()).collect();
        centers = found.into_iter().map(|(r, z)| (z, r)).collect();
        half_width = 2.0 * pitch;
    }
    survivors.push(anchor.clone());
    let mut best: Option<(f64, Vector)> = None;
    for mut z in survivors {
        for _ in 0..500 {
            let next = a.project(&b.project(&z)?.selected)?.selected;
            let step = next.dist(&z);
            z = next;
            if step <= 1e-15 {
                break;
            }
        }
        if gap(&z)? > 1e-8 {
            continue;
        }
        let dist = z.dist(x);
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, z));
        }
    }
    best.map(|(_, z)| z).ok_or(Error::EmptyIntersection)
}
