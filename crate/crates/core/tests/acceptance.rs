//! End-to-end acceptance criteria. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use drfeas::dr::{run, step_progress_probe, DrStep, StopReason, Trajectory};
use drfeas::harness::{find_scenario, run_pipeline, RunOptions};
use drfeas::rate::{fit_geometric, fit_rlinear, verify_fejer_rate_bound};
use drfeas::reduction::affine_hull_union;
use drfeas::regularity::{
    cq_number_closed_form, cq_number_sampled, diagnose, kappa_bound, quasi_fne_check, DiagnoseOptions, RateVariant,
};
use drfeas::sets::sample_ball;
use drfeas::{vector, SetDescriptor, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;
type Suite = fn() -> Result<usize, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn strips_kappa_sq() -> f64 {
    (17.0 + 2.0 * 2f64.sqrt()) / 20.0
}

fn exact_strip_constant() -> Outcome {
    let mu = 2.0 / (2.0 - 2f64.sqrt()).sqrt();
    let bound = kappa_bound(0.0, 0.0, 2f64.sqrt() / 2.0, mu, RateVariant::General).map_err(|e| e.to_string())?;
    let err = (bound.kappa_sq - strips_kappa_sq()).abs();
    ensure(err <= 1e-12, format!("kappa_sq {} differs by {err:e}", bound.kappa_sq))?;
    Ok(format!("kappa_sq = {:.15}", bound.kappa_sq))
}

fn strips_dominance() -> Outcome {
    let start = Instant::now();
    let s = find_scenario("two-strips").map_err(|e| e.to_string())?;
    let out = run_pipeline(&s, &RunOptions::default()).map_err(|e| e.to_string())?;
    let kappa = strips_kappa_sq().sqrt();
    let rate = out.report.rate.as_ref().ok_or("no rate fit")?;
    ensure(out.trajectory.converged(), "run did not converge")?;
    ensure(
        rate.kappa_emp <= kappa + 0.005,
        format!("kappa_emp {} exceeds {}", rate.kappa_emp, kappa + 0.005),
    )?;
    let oracle = s.oracle().map_err(|e| e.to_string())?;
    let limit = out.trajectory.limit_estimate.clone().ok_or("no limit")?;
    let refs = [
        s.w_hint.clone().ok_or("no w_hint")?,
        oracle.nearest(&s.x0).map_err(|e| e.to_string())?,
        limit,
    ];
    let mut worst = 0.0f64;
    for w in &refs {
        let check = verify_fejer_rate_bound(&out.trajectory, w, kappa).map_err(|e| e.to_string())?;
        ensure(check.passed, format!("bound fails at w = {w} (max ratio {})", check.max_ratio))?;
        worst = worst.max(check.max_ratio);
    }
    let took = within(start, Duration::from_secs(5))?;
    Ok(format!("kappa_emp {:.4} <= {:.4}, worst bound ratio {worst:.3e}, {took:?}", rate.kappa_emp, kappa))
}

fn parabola_shadow_failure() -> Outcome {
    let start = Instant::now();
    let s = find_scenario("parabola-halfplane").map_err(|e| e.to_string())?;
    let out = run_pipeline(&s, &RunOptions::default()).map_err(|e| e.to_string())?;
    let r = &out.report;
    let sh = r.shadows.as_ref().ok_or("no shadow report")?;
    ensure(sh.xbar.dist(&vector(&[0.0, -1.0])) <= 1e-12, format!("fixed point {}", sh.xbar))?;
    ensure(r.fixed_point_residual <= 1e-12, format!("residual {:e}", r.fixed_point_residual))?;
    ensure(sh.p_a.dist(&vector(&[0.0, 0.0])) <= 1e-12, format!("P_A x̄ = {}", sh.p_a))?;
    ensure(sh.p_b.dist(&vector(&[0.0, -1.0])) <= 1e-12, format!("P_B x̄ = {}", sh.p_b))?;
    ensure(!sh.agree, "shadows reported as agreeing")?;
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("x̄ = {}, P_A x̄ = {}, P_B x̄ = {}, {took:?}", sh.xbar, sh.p_a, sh.p_b))
}

fn lines_offset_invariance() -> Outcome {
    let start = Instant::now();
    let s = find_scenario("two-lines-r3").map_err(|e| e.to_string())?;
    let x0 = vector(&[1.0, 1.0, 1.0]);
    let s = s.with_start(x0.clone()).map_err(|e| e.to_string())?;
    let opts = RunOptions::default();
    let traj = run(&s.a, &s.b, &x0, opts.max_iters, opts.tol).map_err(|e| e.to_string())?;
    let pair = affine_hull_union(&s.a, &s.b).map_err(|e| e.to_string())?;
    let expected = vector(&[0.0, 0.0, 1.0]);
    let deviation = traj
        .iterates()
        .iter()
        .map(|x| (x - &pair.hull.project(x)).dist(&expected))
        .fold(0.0, f64::max);
    ensure(deviation <= 1e-8, format!("offset deviation {deviation:e}"))?;
    let reduced = drfeas::reduction::reduce_trajectory(&traj, &s.a, &s.b, &pair.hull).map_err(|e| e.to_string())?;
    let inside = run(&s.a, &s.b, &pair.hull.project(&x0), opts.max_iters, opts.tol).map_err(|e| e.to_string())?;
    let inside = inside.iterates();
    ensure(
        inside.len() == reduced.iterates.len(),
        format!("lengths differ: {} vs {}", inside.len(), reduced.iterates.len()),
    )?;
    let gap = inside.iter().zip(&reduced.iterates).map(|(p, q)| p.dist(q)).fold(0.0, f64::max);
    ensure(gap <= 1e-9, format!("reduced run deviates by {gap:e}"))?;
    let took = within(start, Duration::from_secs(1))?;
    Ok(format!("offset deviation {deviation:.1e}, reduced gap {gap:.1e} over {} iterates, {took:?}", inside.len()))
}

fn lines_shadow_formula() -> Outcome {
    let s = find_scenario("two-lines-r3").map_err(|e| e.to_string())?;
    let s = s.with_start(vector(&[1.0, 1.0, 1.0])).map_err(|e| e.to_string())?;
    let out = run_pipeline(&s, &RunOptions::default()).map_err(|e| e.to_string())?;
    let sh = out.report.shadows.as_ref().ok_or("no shadow report")?;
    let spread = sh.p_a.dist(&sh.p_b).max(sh.p_a.dist(&sh.formula_value)).max(sh.p_b.dist(&sh.formula_value));
    ensure(spread <= 1e-8, format!("shadows spread {spread:e}"))?;
    ensure(sh.agree, "agree flag is false")?;
    let origin = Vector::zeros(3);
    ensure(sh.p_a.dist(&origin) <= 1e-8, format!("common shadow {} is not the origin", sh.p_a))?;
    Ok(format!("P_A x̄ = P_B x̄ = {} (spread {spread:.1e})", sh.formula_value))
}

fn circles_local_rate() -> Outcome {
    let s = find_scenario("two-circles").map_err(|e| e.to_string())?;
    let w = vector(&[0.5, 3f64.sqrt() / 2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut starts = vec![s.x0.clone()];
    starts.extend(sample_ball(&w, 0.05, 20, &mut rng, None));
    let opts = RunOptions::default();
    let (mut worst_kappa, mut worst_r2, mut most_iters) = (0.0f64, 1.0f64, 0usize);
    for x0 in &starts {
        ensure(x0.dist(&w) <= 0.05, format!("start {x0} too far from w"))?;
        let traj = run(&s.a, &s.b, x0, opts.max_iters, opts.tol).map_err(|e| e.to_string())?;
        let limit = traj.limit_estimate.clone().ok_or(format!("no convergence from {x0}"))?;
        ensure(limit.dist(&w) <= 1e-8, format!("from {x0} converged to {limit}"))?;
        let iters = traj.summary().iters;
        ensure(iters <= 200, format!("from {x0}: {iters} iterations"))?;
        let fit = fit_rlinear(&traj, opts.tail_fraction).map_err(|e| e.to_string())?;
        ensure(fit.kappa_emp < 1.0, format!("from {x0}: kappa_emp {}", fit.kappa_emp))?;
        ensure(fit.r_squared >= 0.9, format!("from {x0}: r_squared {}", fit.r_squared))?;
        worst_kappa = worst_kappa.max(fit.kappa_emp);
        worst_r2 = worst_r2.min(fit.r_squared);
        most_iters = most_iters.max(iters);
    }
    let closed = cq_number_closed_form(&s.a, &s.b, &w, None).map_err(|e| e.to_string())?;
    ensure((closed - 0.5).abs() <= 1e-12, format!("closed-form θ̄ {closed}"))?;
    let sampled = cq_number_sampled(&s.a, &s.b, &w, 0.1, 10_000, 42, None).map_err(|e| e.to_string())?;
    ensure((sampled - closed).abs() <= 0.05, format!("sampled θ̂ {sampled} vs {closed}"))?;
    Ok(format!(
        "{} starts, <= {most_iters} iterations, kappa_emp <= {worst_kappa:.4}, r² >= {worst_r2:.4}, θ̂ = {sampled:.4}",
        starts.len()
    ))
}

fn lines_regularity_classes() -> Outcome {
    let s = find_scenario("two-lines-r3").map_err(|e| e.to_string())?;
    let w = Vector::zeros(3);
    let pair = affine_hull_union(&s.a, &s.b).map_err(|e| e.to_string())?;
    let full = cq_number_closed_form(&s.a, &s.b, &w, None).map_err(|e| e.to_string())?;
    let restricted = cq_number_closed_form(&s.a, &s.b, &w, Some(&pair.hull)).map_err(|e| e.to_string())?;
    ensure(full == 1.0, format!("unrestricted θ̄ = {full}"))?;
    ensure(restricted == 0.0, format!("restricted θ̄ = {restricted}"))?;
    let oracle = s.oracle().map_err(|e| e.to_string())?;
    let (_, d) = diagnose(&s.a, &s.b, &w, &DiagnoseOptions::default(), &oracle).map_err(|e| e.to_string())?;
    ensure(!d.strongly_regular && d.affine_hull_regular, "diagnostics flags disagree")?;
    Ok("θ̄ = 1 unrestricted, 0 restricted to the hull".into())
}

fn random_set<R: Rng>(rng: &mut R) -> SetDescriptor {
    let d = rng.random_range(2..5);
    let p = common::random_point(rng, d, 2.0);
    match rng.random_range(0..4) {
        0 => SetDescriptor::sphere(p, rng.random_range(0.2..2.0)).unwrap(),
        1 => SetDescriptor::parabola_hypograph(rng.random_range(0.1..3.0)).unwrap(),
        2 => {
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let inner = common::random_convex_through(rng, &vector(&[0.0, 0.0]));
            SetDescriptor::transformed(inner, vec![vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]], vector(&[1.0, -0.5]))
                .unwrap()
        }
        _ => common::random_convex_through(rng, &p),
    }
}

fn idempotence_suite() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let s = random_set(&mut rng);
        let x = common::random_point(&mut rng, s.dim(), 5.0);
        let p = s.project(&x).map_err(|e| e.to_string())?.selected;
        let pp = s.project(&p).map_err(|e| e.to_string())?.selected;
        ensure(p.dist(&pp) <= 1e-10, format!("{s:?}: P P x moved by {:e}", p.dist(&pp)))?;
    }
    Ok(1000)
}

fn firm_nonexpansive_suite() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0;
    for _ in 0..1000 {
        let d = rng.random_range(2..5);
        let p = common::random_point(&mut rng, d, 2.0);
        let a = common::random_convex_through(&mut rng, &p);
        let b = common::random_convex_through(&mut rng, &p);
        let x = common::random_point(&mut rng, d, 5.0);
        if common::firm_nonexpansive_excess(&a, &b, &x, &p) > 1e-8 {
            violations += 1;
        }
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(1000)
}

fn quasi_fne_suite() -> Result<usize, String> {
    let s = find_scenario("two-circles").map_err(|e| e.to_string())?;
    let w = s.w_hint.clone().ok_or("no w_hint")?;
    let oracle = s.oracle().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for delta in [0.02, 0.05, 0.1] {
        let opts = DiagnoseOptions { delta, ..DiagnoseOptions::default() };
        let (_, d) = diagnose(&s.a, &s.b, &w, &opts, &oracle).map_err(|e| e.to_string())?;
        let check = quasi_fne_check(&s.a, &s.b, &w, delta, d.eps_a, d.eps_b, 2000, 5, &oracle)
            .map_err(|e| e.to_string())?;
        ensure(
            check.holds,
            format!("δ = {delta}: γ̂ {} above γ {}", check.gamma_hat, check.gamma_bound),
        )?;
        checked += 2000;
    }
    Ok(checked)
}

fn positivity_suite() -> Result<usize, String> {
    let mut checked = 0;
    for name in ["two-circles", "two-strips", "circle-line", "two-lines-r3"] {
        let s = find_scenario(name).map_err(|e| e.to_string())?;
        let w = s.w_hint.clone().ok_or("no w_hint")?;
        let oracle = s.oracle().map_err(|e| e.to_string())?;
        let probe = step_progress_probe(&s.a, &s.b, &w, 0.1, 2000, 3, &oracle).map_err(|e| e.to_string())?;
        for &(step, dist) in &probe.pairs {
            if dist > 1e-6 {
                ensure(step > 0.0, format!("{name}: zero step at distance {dist:e}"))?;
                checked += 1;
            }
        }
    }
    Ok(checked)
}

fn property_suites() -> Outcome {
    let mut lines = Vec::new();
    let suites: [(&str, Suite); 4] = [
        ("idempotence", idempotence_suite),
        ("firm nonexpansiveness", firm_nonexpansive_suite),
        ("quasi firm nonexpansiveness", quasi_fne_suite),
        ("step positivity", positivity_suite),
    ];
    for (name, suite) in suites {
        let start = Instant::now();
        let n = suite().map_err(|e| format!("{name}: {e}"))?;
        let took = within(start, Duration::from_secs(10)).map_err(|e| format!("{name}: {e}"))?;
        lines.push(format!("{name} {n} cases {took:.0?}"));
    }
    Ok(lines.join("; "))
}

fn geometric_trajectory(c: f64, kappa: f64, len: i32) -> Trajectory {
    let point = |n: i32| vector(&[c * kappa.powi(n), 0.0]);
    let steps = (0..len)
        .map(|n| DrStep {
            x: point(n),
            a: point(n),
            u: point(n),
            b: point(n),
            x_next: point(n + 1),
            residual: point(n).dist(&point(n + 1)),
        })
        .collect();
    Trajectory {
        steps,
        shadows_a: vec![],
        shadows_b: vec![],
        stop_reason: StopReason::ResidualBelowTol,
        limit_estimate: Some(Vector::zeros(2)),
    }
}

fn geometric_oracle() -> Outcome {
    let errors: Vec<f64> = (0..40).map(|n| 3.0 * 0.5f64.powi(n)).collect();
    let fit = fit_geometric(&errors, 0.5).map_err(|e| e.to_string())?;
    ensure((fit.kappa - 0.5).abs() <= 1e-10, format!("kappa {}", fit.kappa))?;
    ensure((fit.c - 3.0).abs() <= 1e-10, format!("C {}", fit.c))?;
    let rfit = fit_rlinear(&geometric_trajectory(3.0, 0.5, 39), 0.5).map_err(|e| e.to_string())?;
    ensure((rfit.kappa_emp - 0.5).abs() <= 1e-10, format!("trajectory kappa {}", rfit.kappa_emp))?;
    ensure((rfit.c_emp - 3.0).abs() <= 1e-10, format!("trajectory C {}", rfit.c_emp))?;
    Ok(format!("kappa = {:.12}, C = {:.12}", rfit.kappa_emp, rfit.c_emp))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 9] = [
        ("exact rate constant for the strips", exact_strip_constant),
        ("empirical rate below the certified rate on the strips", strips_dominance),
        ("parabola fixed point with disagreeing shadows", parabola_shadow_failure),
        ("constant offset of lines in R3", lines_offset_invariance),
        ("shadow limit formula on lines in R3", lines_shadow_formula),
        ("local R-linear convergence on two circles", circles_local_rate),
        ("regularity classification of lines in R3", lines_regularity_classes),
        ("property suites", property_suites),
        ("geometric fit oracle", geometric_oracle),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {}: {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
