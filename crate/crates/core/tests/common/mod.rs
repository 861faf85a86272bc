#![allow(dead_code)]

use drfeas::{SetDescriptor, Vector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_point<R: Rng>(rng: &mut R, dim: usize, half_width: f64) -> Vector {
    Vector::new((0..dim).map(|_| rng.random_range(-half_width..half_width)).collect()).unwrap()
}

pub fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v = Vector::new((0..dim).map(|_| StandardNormal.sample(rng)).collect()).unwrap();
        if let Some(u) = v.normalized() {
            return u;
        }
    }
}

/// A random convex set of one of the built-in kinds that contains `p`.
pub fn random_convex_through<R: Rng>(rng: &mut R, p: &Vector) -> SetDescriptor {
    let d = p.dim();
    match rng.random_range(0..5) {
        0 => {
            let k = rng.random_range(0..d);
            let dirs: Vec<Vector> = (0..k).map(|_| random_unit(rng, d)).collect();
            SetDescriptor::affine(p.clone(), &dirs).unwrap()
        }
        1 => {
            let n = random_unit(rng, d);
            SetDescriptor::half_space(n.clone(), n.dot(p) + rng.random_range(0.0..1.0)).unwrap()
        }
        2 => {
            let n = random_unit(rng, d);
            let s = n.dot(p);
            SetDescriptor::slab(n, s - rng.random_range(0.0..1.0), s + rng.random_range(0.0..1.0)).unwrap()
        }
        3 => {
            let r = rng.random_range(0.2..2.0);
            let offset = random_unit(rng, d).scale(r * rng.random_range(0.0..1.0));
            SetDescriptor::ball(p + &offset, r).unwrap()
        }
        _ => {
            let lo = Vector::new(p.coords().iter().map(|c| c - rng.random_range(0.0..1.0)).collect()).unwrap();
            let hi = Vector::new(p.coords().iter().map(|c| c + rng.random_range(0.0..1.0)).collect()).unwrap();
            SetDescriptor::bounding_box(lo, hi).unwrap()
        }
    }
}

/// `‖x - Tx‖² + ‖Tx - x̄‖² - ‖x - x̄‖²`, nonpositive for convex pairs.
pub fn firm_nonexpansive_excess(a: &SetDescriptor, b: &SetDescriptor, x: &Vector, xbar: &Vector) -> f64 {
    let step = drfeas::dr::dr_step(a, b, x).unwrap();
    step.residual.powi(2) + step.x_next.dist(xbar).powi(2) - x.dist(xbar).powi(2)
}
