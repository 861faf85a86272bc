//! Named scenarios and the full pipeline: iterate, reduce, diagnose, fit.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dr::{fixed_point_residual, run, Trajectory, TrajectorySummary};
use crate::error::{Error, Result};
use crate::intersection::IntersectionOracle;
use crate::rate::{fit_rlinear, per_step_contraction, verify_fejer_rate_bound, RateReport};
use crate::reduction::{affine_hull_union, reduce_trajectory, shadow_limit_formula, ReductionReport, ShadowLimit};
use crate::regularity::{diagnose, kappa_bound, kappa_bound_saturating, DiagnoseOptions, Diagnostics, RateBound, RateVariant};
use crate::sets::SetDescriptor;
use crate::vector::Vector;

/// Agreement tolerance for shadows and expected points.
pub const POINT_TOL: f64 = 1e-8;
/// Tolerance for expected exact constants.
pub const CONSTANT_TOL: f64 = 1e-12;

/// Rate constants asserted for a scenario instead of estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateInputsSpec {
    #[serde(rename = "eps_A")]
    pub eps_a: f64,
    #[serde(rename = "eps_B")]
    pub eps_b: f64,
    pub theta: f64,
    pub mu: f64,
    pub variant: RateVariant,
}

/// Expected outcomes of a pipeline run. Absent fields are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectations {
    pub converged: Option<bool>,
    pub max_iterations: Option<usize>,
    pub limit: Option<Vector>,
    pub max_fixed_point_residual: Option<f64>,
    pub shadow_agree: Option<bool>,
    #[serde(rename = "shadow_pA")]
    pub shadow_pa: Option<Vector>,
    #[serde(rename = "shadow_pB")]
    pub shadow_pb: Option<Vector>,
    pub shadow_in_intersection: Option<bool>,
    pub offset: Option<Vector>,
    pub reduction_ok: Option<bool>,
    pub kappa_sq: Option<f64>,
    /// `kappa_emp <= kappa_certified + slack`
    pub kappa_emp_slack: Option<f64>,
    pub min_r_squared: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub theta_bar: Option<f64>,
    pub restricted_theta: Option<f64>,
}

impl Expectations {
    /// Keeps only the checks that do not depend on the starting point.
    pub fn start_independent(&self) -> Self {
        Self {
            kappa_sq: self.kappa_sq,
            theta_bar: self.theta_bar,
            restricted_theta: self.restricted_theta,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    #[serde(rename = "A")]
    pub a: SetDescriptor,
    #[serde(rename = "B")]
    pub b: SetDescriptor,
    pub x0: Vector,
    pub w_hint: Option<Vector>,
    /// Known `A ∩ B` when it is a finite set the generic oracle cannot find.
    pub intersection: Option<Vec<Vector>>,
    pub certified: Option<RateInputsSpec>,
    pub expected: Expectations,
}

/// Scenario file layout. Only `A`, `B` and `x0` are required.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "A")]
    pub a: SetDescriptor,
    #[serde(rename = "B")]
    pub b: SetDescriptor,
    pub x0: Vector,
    pub w_hint: Option<Vector>,
    pub intersection: Option<Vec<Vector>>,
    pub certified: Option<RateInputsSpec>,
    #[serde(default)]
    pub expected: Expectations,
}

impl Scenario {
    /// Checks dimensions and that `w_hint` lies in both sets.
    pub fn validate(&self) -> Result<()> {
        let d = self.a.dim();
        if self.b.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.b.dim() });
        }
        self.x0.check_dim(d)?;
        if let Some(w) = &self.w_hint {
            w.check_dim(d)?;
            if !(self.a.contains(w, 1e-9)? && self.b.contains(w, 1e-9)?) {
                return Err(Error::InvalidArgument(format!("w_hint {w} is not in A ∩ B")));
            }
        }
        for p in self.intersection.iter().flatten() {
            p.check_dim(d)?;
        }
        Ok(())
    }

    /// Parses a scenario file. The name defaults to `fallback_name`.
    pub fn from_json(text: &str, fallback_name: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(text)?;
        let s = Scenario {
            name: c.name.unwrap_or_else(|| fallback_name.to_string()),
            description: c.description,
            a: c.a,
            b: c.b,
            x0: c.x0,
            w_hint: c.w_hint,
            intersection: c.intersection,
            certified: c.certified,
            expected: c.expected,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config");
        Self::from_json(&fs::read_to_string(path)?, stem)
    }

    /// The same scenario started from `x0`, keeping only start-independent
    /// expectations.
    pub fn with_start(&self, x0: Vector) -> Result<Self> {
        let s = Scenario { x0, expected: self.expected.start_independent(), ..self.clone() };
        s.validate()?;
        Ok(s)
    }

    pub fn oracle(&self) -> Result<IntersectionOracle> {
        match &self.intersection {
            Some(points) => IntersectionOracle::points(points.clone()),
            None => IntersectionOracle::for_pair(&self.a, &self.b, self.w_hint.as_ref()),
        }
    }
}

fn v(c: &[f64]) -> Vector {
    Vector::new(c.to_vec()).expect("built-in coordinates are valid")
}

/// The built-in scenario suite.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    let w_circles = v(&[0.5, half_sqrt3]);
    let axis = |i: usize| SetDescriptor::affine(Vector::zeros(3), &[Vector::unit(3, i)]).unwrap();
    vec![
        Scenario {
            name: "two-circles".into(),
            description: "unit circles centered at (0,0) and (1,0), started near (1/2, √3/2)".into(),
            a: SetDescriptor::sphere(v(&[0.0, 0.0]), 1.0).unwrap(),
            b: SetDescriptor::sphere(v(&[1.0, 0.0]), 1.0).unwrap(),
            x0: &w_circles + &v(&[0.01, 0.02]),
            w_hint: Some(w_circles.clone()),
            intersection: None,
            certified: None,
            expected: Expectations {
                converged: Some(true),
                max_iterations: Some(200),
                limit: Some(w_circles),
                shadow_agree: Some(true),
                min_r_squared: Some(0.9),
                theta_bar: Some(0.5),
                ..Default::default()
            },
        },
        Scenario {
            name: "two-lines-r3".into(),
            description: "x-axis and y-axis of R^3, affine hull is the xy-plane".into(),
            a: axis(0),
            b: axis(1),
            x0: v(&[1.0, 1.0, 1.0]),
            w_hint: Some(Vector::zeros(3)),
            intersection: None,
            certified: None,
            expected: Expectations {
                converged: Some(true),
                offset: Some(v(&[0.0, 0.0, 1.0])),
                reduction_ok: Some(true),
                shadow_agree: Some(true),
                shadow_pa: Some(Vector::zeros(3)),
                shadow_pb: Some(Vector::zeros(3)),
                shadow_in_intersection: Some(true),
                theta_bar: Some(1.0),
                restricted_theta: Some(0.0),
                ..Default::default()
            },
        },
        Scenario {
            name: "two-strips".into(),
            description: "strips 0 <= x2 <= 1 and 0 <= x2 - x1 <= 1 (second one with unit normal (-1,1)/√2 and bounds [0, 1/√2])"
                .into(),
            a: SetDescriptor::slab(v(&[0.0, 1.0]), 0.0, 1.0).unwrap(),
            b: SetDescriptor::slab(v(&[-FRAC_1_SQRT_2, FRAC_1_SQRT_2]), 0.0, FRAC_1_SQRT_2).unwrap(),
            x0: v(&[0.0, 5.0]),
            w_hint: Some(v(&[-1.0, 0.0])),
            intersection: None,
            certified: Some(RateInputsSpec {
                eps_a: 0.0,
                eps_b: 0.0,
                theta: SQRT_2 / 2.0,
                mu: 2.0 / (2.0 - SQRT_2).sqrt(),
                variant: RateVariant::General,
            }),
            expected: Expectations {
                converged: Some(true),
                kappa_sq: Some((17.0 + 2.0 * SQRT_2) / 20.0),
                kappa_emp_slack: Some(0.005),
                bound_satisfied: Some(true),
                shadow_agree: Some(true),
                theta_bar: Some(SQRT_2 / 2.0),
                ..Default::default()
            },
        },
        Scenario {
            name: "parabola-halfplane".into(),
            description: "A = R x R+, B = {x2 <= -x1^2}; (0,-1) is a fixed point whose shadows differ".into(),
            a: SetDescriptor::half_space(v(&[0.0, -1.0]), 0.0).unwrap(),
            b: SetDescriptor::parabola_hypograph(1.0).unwrap(),
            x0: v(&[0.0, -1.0]),
            w_hint: Some(v(&[0.0, 0.0])),
            intersection: Some(vec![v(&[0.0, 0.0])]),
            certified: None,
            expected: Expectations {
                converged: Some(true),
                max_iterations: Some(1),
                limit: Some(v(&[0.0, -1.0])),
                max_fixed_point_residual: Some(1e-12),
                shadow_agree: Some(false),
                shadow_pa: Some(v(&[0.0, 0.0])),
                shadow_pb: Some(v(&[0.0, -1.0])),
                theta_bar: Some(1.0),
                ..Default::default()
            },
        },
        Scenario {
            name: "circle-line".into(),
            description: "unit circle and the secant line x2 = 1/2, started far from both".into(),
            a: SetDescriptor::sphere(v(&[0.0, 0.0]), 1.0).unwrap(),
            b: SetDescriptor::affine(v(&[0.0, 0.5]), &[v(&[1.0, 0.0])]).unwrap(),
            x0: v(&[0.3, 2.0]),
            w_hint: Some(v(&[half_sqrt3, 0.5])),
            intersection: None,
            certified: None,
            expected: Expectations {
                converged: Some(true),
                limit: Some(v(&[half_sqrt3, 0.5])),
                shadow_agree: Some(true),
                shadow_in_intersection: Some(true),
                theta_bar: Some(0.5),
                ..Default::default()
            },
        },
    ]
}

pub fn find_scenario(name: &str) -> Result<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub count: usize,
    pub delta: f64,
    pub tail_fraction: f64,
    pub theta_margin: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        let d = DiagnoseOptions::default();
        Self {
            max_iters: 100_000,
            tol: 1e-12,
            seed: d.seed,
            count: d.count,
            delta: d.delta,
            tail_fraction: 0.5,
            theta_margin: d.theta_margin,
        }
    }
}

impl RunOptions {
    pub fn diagnose_options(&self) -> DiagnoseOptions {
        DiagnoseOptions { delta: self.delta, count: self.count, seed: self.seed, theta_margin: self.theta_margin }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("max_iters must be >= 1 and tol > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    Scenario,
    Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedRate {
    pub source: KappaSource,
    pub bound: RateBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub scenario: String,
    pub options: RunOptions,
    pub x0: Vector,
    pub trajectory: TrajectorySummary,
    pub fixed_point_residual: f64,
    pub reduction: ReductionReport,
    pub offset: Vector,
    pub shadows: Option<ShadowLimit>,
    pub diagnostics: Option<Diagnostics>,
    pub diagnostics_error: Option<String>,
    pub kappa: Option<CertifiedRate>,
    pub rate: Option<RateReport>,
    pub rate_error: Option<String>,
    pub per_step_max: Option<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub report: PipelineReport,
    pub trajectory: Trajectory,
}

impl PipelineOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed
    }
}

/// Runs DR from `s.x0` and every analysis that applies to the result.
pub fn run_pipeline(s: &Scenario, opts: &RunOptions) -> Result<PipelineOutcome> {
    opts.validate()?;
    s.validate()?;
    let (a, b) = (&s.a, &s.b);
    let traj = run(a, b, &s.x0, opts.max_iters, opts.tol)?;
    let fp_residual = fixed_point_residual(a, b, traj.last())?;
    let pair = affine_hull_union(a, b)?;
    let reduced = reduce_trajectory(&traj, a, b, &pair.hull)?;
    let reduction = ReductionReport::new(&pair, &reduced);
    let shadows = match traj.converged() {
        true => Some(shadow_limit_formula(&traj, &pair.hull, a, b, POINT_TOL)?),
        false => None,
    };

    let oracle = s.oracle();
    let mut diagnostics = None;
    let mut diagnostics_error = None;
    if let Some(w) = &s.w_hint {
        match oracle.as_ref().map_err(|e| e.to_string()).and_then(|o| {
            diagnose(a, b, w, &opts.diagnose_options(), o).map_err(|e| e.to_string())
        }) {
            Ok((_, d)) => diagnostics = Some(d),
            Err(e) => diagnostics_error = Some(e),
        }
    }

    let kappa = match (&s.certified, &diagnostics) {
        (Some(c), _) => Some(CertifiedRate {
            source: KappaSource::Scenario,
            bound: kappa_bound(c.eps_a, c.eps_b, c.theta, c.mu, c.variant)?,
        }),
        (None, Some(d)) => {
            let general = kappa_bound_saturating(d.eps_a, d.eps_b, d.theta_used, d.mu, RateVariant::General)?;
            let bound = if a.is_affine() {
                let affine = kappa_bound_saturating(d.eps_a, d.eps_b, d.theta_used, d.mu, RateVariant::AffineA)?;
                if affine.feasible { affine } else { general }
            } else {
                general
            };
            Some(CertifiedRate { source: KappaSource::Diagnostics, bound })
        }
        _ => None,
    };
    let kappa_certified = kappa.as_ref().and_then(|k| k.bound.kappa);

    let (rate, rate_error) = match fit_rlinear(&traj, opts.tail_fraction) {
        Ok(fit) => {
            let check = match (kappa_certified, &traj.limit_estimate) {
                (Some(k), Some(limit)) => {
                    let w = s.w_hint.as_ref().unwrap_or(limit);
                    Some(verify_fejer_rate_bound(&traj, w, k)?)
                }
                _ => None,
            };
            (Some(RateReport::new(&fit, kappa_certified, check)), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let per_step_max = match &oracle {
        Ok(o) => per_step_contraction(&traj, o)?.into_iter().reduce(f64::max),
        Err(_) => None,
    };

    let mut report = PipelineReport {
        scenario: s.name.clone(),
        options: opts.clone(),
        x0: s.x0.clone(),
        trajectory: traj.summary(),
        fixed_point_residual: fp_residual,
        reduction,
        offset: reduced.offset.clone(),
        shadows,
        diagnostics,
        diagnostics_error,
        kappa,
        rate,
        rate_error,
        per_step_max,
        checks: Vec::new(),
        passed: true,
    };
    report.checks = check_expectations(&s.expected, &report, &reduced.offset_check);
    report.passed = report.checks.iter().all(|c| c.passed);
    Ok(PipelineOutcome { report, trajectory: traj })
}

struct Checker(Vec<Check>);

impl Checker {
    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.0.push(Check { name: name.to_string(), passed, detail });
    }

    fn missing(&mut self, name: &str, what: &str) {
        self.push(name, false, format!("{what} not available"));
    }

    fn point(&mut self, name: &str, expected: &Vector, got: Option<&Vector>) {
        match got {
            Some(p) if p.dim() == expected.dim() => {
                let d = p.dist(expected);
                self.push(name, d <= POINT_TOL, format!("{p} vs expected {expected} (distance {d:e})"));
            }
            Some(p) => self.push(name, false, format!("{p} has the wrong dimension")),
            None => self.missing(name, "point"),
        }
    }

    fn constant(&mut self, name: &str, expected: f64, got: Option<f64>) {
        match got {
            Some(x) => self.push(name, (x - expected).abs() <= CONSTANT_TOL, format!("{x} vs expected {expected}")),
            None => self.missing(name, "value"),
        }
    }

    fn flag(&mut self, name: &str, expected: bool, got: Option<bool>) {
        match got {
            Some(x) => self.push(name, x == expected, format!("{x} vs expected {expected}")),
            None => self.missing(name, "flag"),
        }
    }
}

fn check_expectations(e: &Expectations, r: &PipelineReport, offset_check: &[f64]) -> Vec<Check> {
    let mut c = Checker(Vec::new());
    let converged = r.trajectory.limit.is_some();
    if let Some(want) = e.converged {
        c.flag("converged", want, Some(converged));
    }
    if let Some(max) = e.max_iterations {
        let n = r.trajectory.iters;
        c.push("max_iterations", n <= max, format!("{n} iterations, at most {max} expected"));
    }
    if let Some(limit) = &e.limit {
        c.point("limit", limit, r.trajectory.limit.as_ref());
    }
    if let Some(max) = e.max_fixed_point_residual {
        let got = r.fixed_point_residual;
        c.push("fixed_point_residual", got <= max, format!("{got:e}, at most {max:e} expected"));
    }
    let shadows = r.shadows.as_ref();
    if let Some(want) = e.shadow_agree {
        c.flag("shadow_agree", want, shadows.map(|s| s.agree));
    }
    if let Some(p) = &e.shadow_pa {
        c.point("shadow_pA", p, shadows.map(|s| &s.p_a));
    }
    if let Some(p) = &e.shadow_pb {
        c.point("shadow_pB", p, shadows.map(|s| &s.p_b));
    }
    if let Some(want) = e.shadow_in_intersection {
        c.flag("shadow_in_intersection", want, shadows.map(|s| s.in_intersection));
    }
    if let Some(offset) = &e.offset {
        c.point("offset", offset, Some(&r.offset));
        let worst = offset_check.iter().copied().fold(0.0, f64::max);
        c.push("offset_constant", worst <= POINT_TOL, format!("largest offset drift {worst:e}"));
    }
    if let Some(want) = e.reduction_ok {
        c.flag("reduction_ok", want, Some(r.reduction.reduction_ok));
    }
    if let Some(k) = e.kappa_sq {
        c.constant("kappa_sq", k, r.kappa.as_ref().map(|k| k.bound.kappa_sq));
    }
    let rate = r.rate.as_ref();
    if let Some(slack) = e.kappa_emp_slack {
        match (rate, rate.and_then(|x| x.kappa_certified)) {
            (Some(x), Some(k)) => c.push(
                "kappa_emp",
                x.kappa_emp <= k + slack,
                format!("kappa_emp {} vs certified {k} + {slack}", x.kappa_emp),
            ),
            _ => c.missing("kappa_emp", "empirical or certified rate"),
        }
    }
    if let Some(min) = e.min_r_squared {
        match rate {
            Some(x) => c.push("r_squared", x.r_squared >= min, format!("{} vs at least {min}", x.r_squared)),
            None => c.missing("r_squared", "rate fit"),
        }
    }
    if let Some(want) = e.bound_satisfied {
        c.flag("bound_satisfied", want, rate.and_then(|x| x.bound_satisfied));
    }
    let diag = r.diagnostics.as_ref();
    if let Some(t) = e.theta_bar {
        c.constant("theta_bar", t, diag.map(|d| d.theta_bar));
    }
    if let Some(t) = e.restricted_theta {
        c.constant("restricted_theta", t, diag.map(|d| d.restricted_theta));
    }
    c.0
}

/// Runs several scenarios on separate threads, preserving order.
pub fn run_scenarios(scenarios: &[Scenario], opts: &RunOptions) -> Vec<Result<PipelineOutcome>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|s| scope.spawn(move || run_pipeline(s, opts))).collect();
        handles.into_iter().map(|h| h.join().expect("pipeline thread panicked")).collect()
    })
}

/// Pretty JSON of a report, with a trailing newline.
pub fn report_json(report: &PipelineReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

/// Writes `<name>.trajectory.csv` and `<name>.report.json` into `out_dir`.
pub fn write_outputs(outcome: &PipelineOutcome, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let name = &outcome.report.scenario;
    let csv = out_dir.join(format!("{name}.trajectory.csv"));
    let json = out_dir.join(format!("{name}.report.json"));
    fs::write(&csv, outcome.trajectory.to_csv())?;
    fs::write(&json, report_json(&outcome.report)?)?;
    Ok((csv, json))
}
