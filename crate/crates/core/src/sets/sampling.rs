//! Random proximal normals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AffineSubspace, SetDescriptor};
use crate::error::{Error, Result};
use crate::vector::Vector;

/// A foot point `a` of the set and a proximal normal `x - a` at it.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximalNormal {
    pub foot: Vector,
    pub normal: Vector,
}

/// Samples `count` points uniformly from the ball of radius `radius` around
/// `base`. With `within`, the ball is the one inside that affine subspace
/// (whose base point is then ignored in favour of `base`).
pub fn sample_ball(
    base: &Vector,
    radius: f64,
    count: usize,
    rng: &mut impl Rng,
    within: Option<&AffineSubspace>,
) -> Vec<Vector> {
    let d = base.dim();
    let basis: Vec<Vector> = match within {
        Some(l) => l.directions().to_vec(),
        None => (0..d).map(|i| Vector::unit(d, i)).collect(),
    };
    let k = basis.len();
    if k == 0 {
        return vec![base.clone(); count];
    }
    (0..count)
        .map(|_| {
            let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let r = radius * rng.random::<f64>().powf(1.0 / k as f64);
            basis
                .iter()
                .zip(&g)
                .fold(base.clone(), |acc, (q, gi)| acc.axpy(r * gi / gn, q))
        })
        .collect()
}

/// Proximal normals of `set` gathered by projecting random points of the
/// ball `B(base, radius)`. Points that land inside the set are discarded, so
/// fewer than `count` pairs may come back.
pub fn proximal_normal_sample(
    set: &SetDescriptor,
    base: &Vector,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<ProximalNormal>> {
    proximal_normal_sample_in(set, base, radius, count, seed, None)
}

/// [`proximal_normal_sample`] with the sampling ball restricted to an affine
/// subspace through `base`; normals are then projected onto its direction
/// space.
pub fn proximal_normal_sample_in(
    set: &SetDescriptor,
    base: &Vector,
    radius: f64,
    count: usize,
    seed: u64,
    within: Option<&AffineSubspace>,
) -> Result<Vec<ProximalNormal>> {
    base.check_dim(set.dim())?;
    if !(radius > 0.0) || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "proximal normal sampling needs radius > 0 and count >= 1 (got {radius}, {count})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for x in sample_ball(base, radius, count, &mut rng, within) {
        let proj = set.project(&x)?;
        if proj.distance <= 1e-12 {
            continue;
        }
        let mut normal = &x - &proj.selected;
        if let Some(l) = within {
            normal = l.project_direction(&normal);
            if normal.norm() <= 1e-12 {
                continue;
            }
        }
        out.push(ProximalNormal { foot: proj.selected, normal });
    }
    if out.is_empty() {
        return Err(Error::NoSamples(format!(
            "all {count} samples around {base} fell inside the set"
        )));
    }
    Ok(out)
}
