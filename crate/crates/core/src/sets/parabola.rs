//! Nearest points on the boundary of `{(x1, x2) : x2 <= -a x1^2}`.

use std::f64::consts::PI;

/// Real roots of the depressed cubic `t^3 + p t + q = 0`.
pub(crate) fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if p == 0.0 {
        return vec![(-q).cbrt()];
    }
    if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else {
        // three real roots (p < 0 here), trigonometric form
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    }
}

/// Candidate boundary feet `(t, -a t^2)` for a point `(x1, x2)` outside the
/// hypograph: every real stationary point of the squared distance, Newton
/// polished. The caller picks the minimizers.
pub(crate) fn boundary_candidates(a: f64, x1: f64, x2: f64) -> Vec<[f64; 2]> {
    // d/dt [(t - x1)^2 + (a t^2 + x2)^2] / 2 = 2a^2 t^3 + (1 + 2a x2) t - x1
    let c3 = 2.0 * a * a;
    let c1 = 1.0 + 2.0 * a * x2;
    let p = c1 / c3;
    let q = -x1 / c3;
    depressed_cubic_roots(p, q)
        .into_iter()
        .map(|mut t| {
            for _ in 0..4 {
                let f = c3 * t * t * t + c1 * t - x1;
                let df = 3.0 * c3 * t * t + c1;
                if df.abs() < 1e-300 {
                    break;
                }
                let next = t - f / df;
                if !next.is_finite() {
                    break;
                }
                t = next;
            }
            [t, -a * t * t]
        })
        .collect()
}
