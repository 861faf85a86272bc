//! Points of a low-dimensional Euclidean space.

use std::fmt;
use std::ops::{Add, Index, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ambient dimension accepted at construction.
pub const MAX_DIM: usize = 16;

/// A finite point of ℝ^d with `1 <= d <= MAX_DIM`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidVector(format!(
                "dimension {} outside 1..={MAX_DIM}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidVector(format!("non-finite entry {bad}")));
        }
        Ok(Self(coords))
    }

    /// Builds a vector from arithmetic on already-validated vectors.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.len() <= MAX_DIM);
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_raw(vec![0.0; dim])
    }

    /// The `i`-th standard basis vector.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self::from_raw(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector::from_raw(self.0.iter().map(|c| c * s).collect())
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&other.0).map(|(a, b)| a + s * b).collect())
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        (n > 1e-300).then(|| self.scale(1.0 / n))
    }

    /// Reflection of `self` through `center`: `2 * center - self`.
    pub fn reflect_through(&self, center: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&center.0).map(|(x, c)| 2.0 * c - x).collect())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found: self.dim() })
        }
    }

    /// Coordinatewise lexicographic comparison.
    pub fn lex_cmp(&self, other: &Vector) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                std::cmp::Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.dim().cmp(&other.dim())
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Vector {
    type Output = Vector;

    fn add(self, rhs: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;

    fn sub(self, rhs: &Vector) -> Vector {
        Vector::from_raw(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Shorthand used throughout tests and scenario tables.
///
/// Panics on invalid input, so only use it with literal coordinates.
pub fn vector(coords: &[f64]) -> Vector {
    Vector::new(coords.to_vec()).expect("literal vector must be valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![0.0; 17]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(Vector::new(vec![0.0; 16]).is_ok());
    }

    #[test]
    fn json_is_a_plain_array() {
        let v = vector(&[1.0, -2.5]);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[1.0,-2.5]");
        let back: Vector = serde_json::from_str("[1.0,-2.5]").unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Vector>("[]").is_err());
    }

    #[test]
    fn lexicographic_order() {
        use std::cmp::Ordering::*;
        assert_eq!(vector(&[0.0, 1.0]).lex_cmp(&vector(&[0.0, 2.0])), Less);
        assert_eq!(vector(&[1.0, 0.0]).lex_cmp(&vector(&[0.0, 2.0])), Greater);
        assert_eq!(vector(&[1.0, 2.0]).lex_cmp(&vector(&[1.0, 2.0])), Equal);
    }
}
