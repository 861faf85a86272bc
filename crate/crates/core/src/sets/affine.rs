use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

/// Residual norm below which a vector is treated as dependent during
/// Gram-Schmidt.
pub const GRAM_SCHMIDT_DROP_TOL: f64 = 1e-10;

/// Orthonormality tolerance for direction bases.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// Modified Gram-Schmidt over `vectors`, dropping any vector whose residual
/// falls under the drop tolerance (relative to its own norm, floored at 1).
///
/// A second orthogonalization sweep is applied to each kept vector so the
/// output stays orthonormal to roundoff even for nearly dependent input.
pub fn orthonormalize<'a, I>(vectors: I) -> Vec<Vector>
where
    I: IntoIterator<Item = &'a Vector>,
{
    let mut basis: Vec<Vector> = Vec::new();
    for v in vectors {
        let scale = v.norm().max(1.0);
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = r.dot(q);
                r = r.axpy(-c, q);
            }
        }
        let n = r.norm();
        if n > GRAM_SCHMIDT_DROP_TOL * scale {
            basis.push(r.scale(1.0 / n));
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in ℝ^dim.
pub fn complement_basis(basis: &[Vector], dim: usize) -> Vec<Vector> {
    let units: Vec<Vector> = (0..dim).map(|i| Vector::unit(dim, i)).collect();
    let full = orthonormalize(basis.iter().chain(units.iter()));
    full[basis.len().min(full.len())..].to_vec()
}

/// Orthogonal projection of `v` onto `span(basis)` (basis orthonormal).
pub fn project_onto_span(basis: &[Vector], v: &Vector) -> Vector {
    basis
        .iter()
        .fold(Vector::zeros(v.dim()), |acc, q| acc.axpy(q.dot(v), q))
}

/// An affine subspace `base_point + span(directions)` with an orthonormal
/// direction basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAffine")]
pub struct AffineSubspace {
    base_point: Vector,
    directions: Vec<Vector>,
}

#[derive(Deserialize)]
struct RawAffine {
    base_point: Vector,
    #[serde(default)]
    directions: Vec<Vector>,
}

impl TryFrom<RawAffine> for AffineSubspace {
    type Error = Error;

    fn try_from(raw: RawAffine) -> Result<Self> {
        AffineSubspace::new(raw.base_point, &raw.directions)
    }
}

impl AffineSubspace {
    /// Builds `base + span(directions)`, orthonormalizing the spanning set.
    /// Dependent directions are dropped.
    pub fn new(base_point: Vector, directions: &[Vector]) -> Result<Self> {
        let d = base_point.dim();
        for v in directions {
            v.check_dim(d)?;
        }
        let directions = orthonormalize(directions);
        Ok(Self { base_point, directions })
    }

    /// Like [`AffineSubspace::new`] but requires the directions to already be
    /// orthonormal.
    pub fn from_orthonormal(base_point: Vector, directions: Vec<Vector>) -> Result<Self> {
        let d = base_point.dim();
        for (i, u) in directions.iter().enumerate() {
            u.check_dim(d)?;
            for (j, v) in directions.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (u.dot(v) - target).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidSet(format!(
                        "directions {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Self { base_point, directions })
    }

    /// The whole ambient space, anchored at `base_point`.
    pub fn full_space(base_point: Vector) -> Self {
        let d = base_point.dim();
        let directions = (0..d).map(|i| Vector::unit(d, i)).collect();
        Self { base_point, directions }
    }

    /// The zero-dimensional subspace `{point}`.
    pub fn point(point: Vector) -> Self {
        Self { base_point: point, directions: Vec::new() }
    }

    pub fn base_point(&self) -> &Vector {
        &self.base_point
    }

    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }

    pub fn ambient_dim(&self) -> usize {
        self.base_point.dim()
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim()
    }

    /// Orthonormal basis of the orthogonal complement of the direction space.
    pub fn normal_basis(&self) -> Vec<Vector> {
        complement_basis(&self.directions, self.ambient_dim())
    }

    /// Projection of a free vector onto the direction space.
    pub fn project_direction(&self, v: &Vector) -> Vector {
        project_onto_span(&self.directions, v)
    }

    pub fn project(&self, x: &Vector) -> Vector {
        let rel = x - &self.base_point;
        &self.base_point + &self.project_direction(&rel)
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        x.dist(&self.project(x))
    }

    /// Same subspace with a different base point (which must lie in it).
    pub fn rebased(&self, base_point: Vector) -> Self {
        Self { base_point, directions: self.directions.clone() }
    }

    /// Image under `x ↦ map(x)` for an affine isometry given by its linear
    /// part (`linear`) and the image of the base point.
    pub(crate) fn mapped(&self, base_image: Vector, linear: impl Fn(&Vector) -> Vector) -> Self {
        Self {
            base_point: base_image,
            directions: self.directions.iter().map(linear).collect(),
        }
    }
}
