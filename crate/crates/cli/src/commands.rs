//! The subcommands. Each returns a JSON result and writes its own CSV artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use confext::diagnostics::{bubble, concentration_report, BubbleParams, ConcentrationReport, RescaleParams};
use confext::functionals::{
    existence_condition, lambda_threshold, sharp_constant, sobolev_trace_ratio, ExistenceCheck, SharpConstant,
    SharpMethod, SharpSettings,
};
use confext::geometry::mobius_f_inverse;
use confext::operators::{
    conformal_pullback_check, extend_halfspace, weighted_harmonic_residual, Backend, BoundaryFunction, ExtensionField,
    ExtensionOperator, HalfspaceData, HalfspaceSettings,
};
use confext::quadrature::{
    build_sphere_quadrature, integrate_ball, integrate_boundary, BallQuadrature, RadialRule, SphereQuadrature,
};
use confext::solver::{
    continuation, default_schedule, maximize, multistart_inits, ContinuationReport, ContinuationSettings,
    SubcriticalProblem,
};
use confext::{BallPoint, HalfSpacePoint, ProblemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{QuadratureConfig, RunConfig};

/// Discretization reported with every result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionInfo {
    pub sphere_resolution: usize,
    pub sphere_nodes: usize,
    pub radial: RadialRule,
    pub ball_nodes: usize,
    /// Smallest distance from a ball node to the sphere.
    pub delta_min: f64,
}

/// A reported number with the resolution it was computed at and an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub resolution: Option<usize>,
    pub est_error: Option<f64>,
}

pub struct CommandOutput {
    pub passed: bool,
    pub resolution: ResolutionInfo,
    pub result: Value,
}

pub fn build_operator(params: &ProblemParams, q: &QuadratureConfig) -> Result<ExtensionOperator> {
    let sphere = build_sphere_quadrature(params, q.sphere_resolution)?;
    let ball = BallQuadrature::new(params, q.radial, q.sphere_resolution)?;
    let backend = if q.cache_kernel { Backend::DenseCached } else { Backend::Auto };
    Ok(ExtensionOperator::new(params, sphere, ball, backend)?)
}

fn resolution_info(op: &ExtensionOperator, q: &QuadratureConfig) -> ResolutionInfo {
    ResolutionInfo {
        sphere_resolution: q.sphere_resolution,
        sphere_nodes: op.sphere().len(),
        radial: q.radial,
        ball_nodes: op.ball().len(),
        delta_min: op.ball().delta_min(),
    }
}

fn midpoint_exponent(params: &ProblemParams) -> f64 {
    0.5 * (params.p_crit() + params.p_bulk())
}

fn sharp_for_threshold(params: &ProblemParams) -> Result<SharpConstant> {
    Ok(sharp_constant(params, SharpMethod::ConstantTestFunction, &SharpSettings::default())?)
}

fn write_profile(out: &Path, name: &str, v: &BoundaryFunction, quad: &SphereQuadrature) -> Result<String> {
    let dir = out.join("profiles");
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let rel = format!("profiles/{name}.csv");
    let file = File::create(out.join(&rel)).with_context(|| format!("cannot create {rel}"))?;
    v.write_csv(quad, BufWriter::new(file))?;
    Ok(rel)
}

/// A random smooth function: trigonometric of degree 4 (`n = 2`) or a cubic polynomial (`n = 3`).
fn random_bandlimited(n: usize, rng: &mut ChaCha8Rng) -> impl Fn(&[f64]) -> f64 + Sync {
    let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-0.3..0.3)).collect();
    move |x: &[f64]| {
        if n == 2 {
            let t = x[1].atan2(x[0]);
            1.0 + (1..=4).map(|k| (c[2 * k - 2] * (k as f64 * t).cos() + c[2 * k - 1] * (k as f64 * t).sin()) / k as f64).sum::<f64>()
        } else {
            let (a, b, z) = (x[0], x[1], x[2]);
            1.0 + c[0] * a + c[1] * b + c[2] * z + c[3] * a * b + c[4] * b * z + c[5] * a * z + c[6] * (a * a - b * b)
                + c[7] * (3.0 * z * z - 1.0) + c[8] * a * b * z + c[9] * z * (5.0 * z * z - 3.0)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    value: f64,
    tolerance: f64,
    resolution: Option<usize>,
    detail: String,
}

pub fn verify(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.params;
    let n = params.n();
    let q = &cfg.quadrature;
    let op = build_operator(&params, q)?;
    let quad = op.sphere();
    let res = Some(q.sphere_resolution);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let kcheck = cfg.k_spec.validate(&params)?;
    checks.push(Check {
        name: "weight_positivity",
        passed: kcheck.min > 0.0,
        value: kcheck.min,
        tolerance: 0.0,
        resolution: Some(kcheck.grid_points),
        detail: "minimum of K on the check grid; must be positive".into(),
    });

    let hs = HalfspaceSettings::default();
    let pts: Vec<HalfSpacePoint> = (0..8)
        .map(|_| {
            let xp = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
            HalfSpacePoint::new(xp, 10f64.powf(rng.gen_range(-1.5..1.0))).expect("positive height")
        })
        .collect();
    let one = |_: &[f64]| 1.0;
    let mass = extend_halfspace(HalfspaceData::Function(&one), &pts, &params, &hs)?;
    let worst = mass.iter().fold(0.0f64, |m, v| m.max((v.value - 1.0).abs()));
    checks.push(Check {
        name: "kernel_normalization",
        passed: worst < 1e-6,
        value: worst,
        tolerance: 1e-6,
        resolution: None,
        detail: "max |∫ P_a(y', x) dy' - 1| over 8 sampled points".into(),
    });

    let v = BoundaryFunction::new((0..quad.len()).map(|_| rng.gen_range(0.0..1.0)).collect(), quad)?;
    let f = ExtensionField::new((0..op.ball().len()).map(|_| rng.gen_range(0.0..1.0)).collect(), op.ball())?;
    let e = op.extend(&v)?;
    let t = op.adjoint(&f)?;
    let lhs = integrate_ball(&e.values().iter().zip(f.values()).map(|(a, b)| a * b).collect::<Vec<_>>(), op.ball())?;
    let rhs = integrate_boundary(&v.values().iter().zip(t.values()).map(|(a, b)| a * b).collect::<Vec<_>>(), quad)?;
    let dual = (lhs - rhs).abs() / lhs.abs();
    checks.push(Check {
        name: "operator_duality",
        passed: dual < 1e-10,
        value: dual,
        tolerance: 1e-10,
        resolution: res,
        detail: "relative gap between <Pv, F> and <v, TF>".into(),
    });
    let min_val = e.values().iter().chain(t.values()).cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "operator_positivity",
        passed: min_val > 0.0,
        value: min_val,
        tolerance: 0.0,
        resolution: res,
        detail: "smallest value of Pv and TF for nonnegative random v, F".into(),
    });
    let er = op.extend(&v.antipodal_reflection(quad)?)?;
    let scale = e.values().iter().cloned().fold(0.0, f64::max);
    let equiv = (0..op.ball().len())
        .map(|j| (er.values()[j] - e.values()[op.ball().antipode(j)]).abs() / scale)
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "antipodal_equivariance",
        passed: equiv < 1e-13,
        value: equiv,
        tolerance: 1e-13,
        resolution: res,
        detail: "max |P(v∘A)(ξ) - Pv(-ξ)| relative to max Pv".into(),
    });

    let mut pull = 0.0f64;
    for _ in 0..3 {
        let g = random_bandlimited(n, &mut rng);
        let mut sample = Vec::new();
        for _ in 0..6 {
            let mut xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
            let r = 0.9 * rng.gen_range(0.0..1.0f64).powf(1.0 / n as f64);
            xi.iter_mut().for_each(|c| *c *= r / norm);
            sample.push(mobius_f_inverse(&BallPoint::new(xi)?)?);
        }
        pull = pull.max(conformal_pullback_check(&g, quad, &sample, &params, &hs)?.max_rel_error);
    }
    checks.push(Check {
        name: "conformal_pullback",
        passed: pull < 1e-4,
        value: pull,
        tolerance: 1e-4,
        resolution: res,
        detail: "max relative gap of the intertwining identity, 3 smooth v, |F(x)| ≤ 0.9".into(),
    });

    if params.a() > -1.0 && params.a() < 1.0 {
        let b = BubbleParams::standard(&params);
        let u = |y: &[f64]| bubble(y, &params, &b);
        let phi = |x: &HalfSpacePoint| {
            extend_halfspace(HalfspaceData::Function(&u), std::slice::from_ref(x), &params, &hs)
                .map(|v| v[0].value)
                .unwrap_or(f64::NAN)
        };
        let mut worst = 0.0f64;
        for (xp, xn) in [(0.0, 1.0), (0.5, 0.7), (-0.3, 1.5)] {
            let x = HalfSpacePoint::new(vec![xp; n - 1], xn)?;
            worst = worst.max(weighted_harmonic_residual(&phi, &x, 1e-2, &params)?.abs());
        }
        checks.push(Check {
            name: "weighted_harmonicity",
            passed: worst < 1e-4,
            value: worst,
            tolerance: 1e-4,
            resolution: None,
            detail: "finite-difference div(x_n^a ∇ P_a u) for the bubble, h = 1e-2".into(),
        });
    }

    let s = sharp_for_threshold(&params)?.s_est;
    let mut ratio = 0.0f64;
    for trial in 0..20 {
        let w = if trial % 2 == 0 {
            let g = random_bandlimited(n, &mut rng);
            BoundaryFunction::from_fn(quad, |x| g(x).powi(2))?
        } else {
            BoundaryFunction::new((0..quad.len()).map(|_| rng.gen_range(0.0..1.0)).collect(), quad)?
        };
        ratio = ratio.max(sobolev_trace_ratio(&w, &op)? / s);
    }
    checks.push(Check {
        name: "sharp_inequality",
        passed: ratio <= 1.0 + 1e-3,
        value: ratio - 1.0,
        tolerance: 1e-3,
        resolution: res,
        detail: format!("max over 20 nonnegative v of ‖Pv‖/(S‖v‖) - 1, S = {s}"),
    });

    let passed = checks.iter().all(|c| c.passed);
    Ok(CommandOutput { passed, resolution: resolution_info(&op, q), result: json!({ "checks": checks }) })
}

pub fn sharp(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.params;
    let q = &cfg.quadrature;
    let methods = cfg.sharp.methods.clone().unwrap_or_else(|| {
        let mut m = Vec::new();
        if params.n() == 3 && params.a() == 0.0 {
            m.push(SharpMethod::FormulaA0);
        }
        m.push(SharpMethod::ConstantTestFunction);
        m.push(SharpMethod::NumericalMaximization);
        m
    });
    let radial_points = match q.radial {
        RadialRule::GaussLegendre { points } => points,
        RadialRule::Graded { .. } => bail!("numerical maximization needs a gauss_legendre radial rule"),
    };
    let settings = SharpSettings {
        sphere_resolution: q.sphere_resolution,
        radial_points,
        solver: cfg.solver,
        starts: cfg.sharp.starts,
        seed: cfg.seed,
    };
    let estimates = methods
        .iter()
        .map(|&m| sharp_constant(&params, m, &settings))
        .collect::<confext::Result<Vec<_>>>()?;
    let mut discrepancies = Vec::new();
    for i in 0..estimates.len() {
        for j in i + 1..estimates.len() {
            let (a, b) = (&estimates[i], &estimates[j]);
            discrepancies.push(json!({
                "methods": [a.method, b.method],
                "abs_diff": (a.s_est - b.s_est).abs(),
                "rel_diff": (a.s_est - b.s_est).abs() / b.s_est,
            }));
        }
    }
    let op = build_operator(&params, q)?;
    Ok(CommandOutput {
        passed: true,
        resolution: resolution_info(&op, q),
        result: json!({ "estimates": estimates, "discrepancies": discrepancies }),
    })
}

#[derive(Debug, Clone, Serialize)]
struct StartSummary {
    start: usize,
    lambda_est: f64,
    converged: bool,
    iterations: usize,
}

struct SolveRun {
    best: confext::solver::MaximizeReport,
    starts: Vec<StartSummary>,
}

fn solve_once(cfg: &RunConfig, op: &ExtensionOperator, p: f64) -> Result<SolveRun> {
    let k = cfg.k_spec.weight(op.sphere())?;
    let problem = SubcriticalProblem::new(op, k, p, cfg.solver)?;
    let mut inits = vec![BoundaryFunction::constant(op.sphere(), 1.0)?];
    inits.extend(multistart_inits(op.sphere(), cfg.solve.starts - 1, cfg.seed, cfg.solve.sigma)?);
    let mut best: Option<confext::solver::MaximizeReport> = None;
    let mut starts = Vec::new();
    for (i, init) in inits.iter().enumerate() {
        let run = maximize(&problem, init)?;
        starts.push(StartSummary {
            start: i,
            lambda_est: run.state.lambda_est,
            converged: run.converged,
            iterations: run.state.iteration,
        });
        let better = match &best {
            None => true,
            Some(b) => (run.converged, run.state.lambda_est) > (b.converged, b.state.lambda_est),
        };
        if better {
            best = Some(run);
        }
    }
    Ok(SolveRun { best: best.expect("at least one start"), starts })
}

fn threshold_block(cfg: &RunConfig, op: &ExtensionOperator, lambda: f64) -> Result<(Value, ExistenceCheck)> {
    let params = cfg.params;
    let k = cfg.k_spec.weight(op.sphere())?;
    let s = sharp_for_threshold(&params)?;
    let thr = lambda_threshold(&k, &params, s.s_est);
    let thr_err = thr * params.p_bulk() * s.est_error / s.s_est;
    let exist = existence_condition(&k, &params);
    let block = json!({
        "sharp_constant": Quantity { value: s.s_est, resolution: None, est_error: Some(s.est_error) },
        "lambda_threshold": Quantity { value: thr, resolution: Some(cfg.quadrature.sphere_resolution), est_error: Some(thr_err) },
        "lambda_exceeds_threshold": lambda > thr,
        "existence_condition": exist,
    });
    Ok((block, exist))
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<CommandOutput> {
    let params = cfg.params;
    let p = cfg.solve.p.unwrap_or_else(|| midpoint_exponent(&params));
    let op = build_operator(&params, &cfg.quadrature)?;
    let run = solve_once(cfg, &op, p)?;
    let best = &run.best;
    let v = &best.state.v;
    let profile = write_profile(out, "solution", v, op.sphere())?;
    let lambda = best.state.lambda_est;
    let lambda_err = if cfg.error_estimates {
        let half = cfg.quadrature.halved();
        let coarse = solve_once(cfg, &build_operator(&params, &half)?, p)?;
        Some((lambda - coarse.best.state.lambda_est).abs())
    } else {
        None
    };
    let res = Some(cfg.quadrature.sphere_resolution);
    let (thresholds, _) = threshold_block(cfg, &op, lambda)?;
    let result = json!({
        "p": p,
        "converged": best.converged,
        "failure": best.failure,
        "iterations": best.state.iteration,
        "lambda_est": Quantity { value: lambda, resolution: res, est_error: lambda_err },
        "multiplier_from_pairing": Quantity { value: best.multiplier_from_pairing, resolution: res, est_error: lambda_err },
        "el_residual": Quantity { value: best.el_residual, resolution: res, est_error: None },
        "sup_v": v.sup(),
        "inf_v": v.inf(),
        "sup_inf_ratio": v.sup() / v.inf(),
        "starts": run.starts,
        "thresholds": thresholds,
        "weight": cfg.k_spec.validate(&params)?,
        "profile": profile,
    });
    Ok(CommandOutput { passed: best.converged, resolution: resolution_info(&op, &cfg.quadrature), result })
}

#[derive(Debug, Serialize)]
struct StageRow {
    p: f64,
    lambda_est: f64,
    el_residual: f64,
    sup_v: f64,
    inf_v: f64,
    sup_inf_ratio: f64,
    iterations: usize,
    converged: bool,
    blow_up_flag: bool,
}

fn schedule_for(cfg: &RunConfig, op: &ExtensionOperator) -> Vec<f64> {
    let c = &cfg.continuation;
    match &c.schedule {
        Some(s) => s.clone(),
        None => {
            let p_start = c.p_start.unwrap_or_else(|| midpoint_exponent(&cfg.params));
            default_schedule(op, p_start, c.stages, c.epsilon_floor)
        }
    }
}

fn run_continuation(cfg: &RunConfig, op: &ExtensionOperator) -> Result<ContinuationReport> {
    let settings = ContinuationSettings {
        solver: cfg.solver,
        blow_up_factor: cfg.continuation.blow_up_factor,
        epsilon_floor: cfg.continuation.epsilon_floor,
    };
    let k = cfg.k_spec.weight(op.sphere())?;
    let init = BoundaryFunction::constant(op.sphere(), 1.0)?;
    Ok(continuation(op, &k, &schedule_for(cfg, op), &init, &settings)?)
}

fn write_stages(out: &Path, rep: &ContinuationReport, quad: &SphereQuadrature) -> Result<Vec<String>> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = csv::Writer::from_path(out.join("stages.csv")).context("cannot create stages.csv")?;
    for s in &rep.stages {
        w.serialize(StageRow {
            p: s.p,
            lambda_est: s.lambda_est,
            el_residual: s.el_residual,
            sup_v: s.sup_v,
            inf_v: s.inf_v,
            sup_inf_ratio: s.sup_v / s.inf_v,
            iterations: s.iterations,
            converged: s.converged,
            blow_up_flag: s.blow_up_flag,
        })?;
    }
    w.flush()?;
    let mut files = Vec::new();
    for (i, v) in rep.profiles.iter().enumerate() {
        files.push(write_profile(out, &format!("stage_{i:02}"), v, quad)?);
    }
    Ok(files)
}

/// Runs the continuation, writes its artifacts, and summarizes the final stage.
fn continuation_summary(cfg: &RunConfig, out: &Path) -> Result<(ExtensionOperator, ContinuationReport, Value, bool)> {
    let params = cfg.params;
    let op = build_operator(&params, &cfg.quadrature)?;
    let rep = run_continuation(cfg, &op)?;
    let profiles = write_stages(out, &rep, op.sphere())?;
    let res = Some(cfg.quadrature.sphere_resolution);
    let Some((last, v)) = rep.final_state() else {
        bail!("continuation produced no stages: {}", rep.aborted.clone().unwrap_or_default());
    };
    let final_profile = write_profile(out, "final", v, op.sphere())?;
    let (lambda_err, sup_err) = if cfg.error_estimates {
        let coarse = run_continuation(cfg, &build_operator(&params, &cfg.quadrature.halved())?)?;
        match coarse.final_state() {
            Some((c, _)) if c.p == last.p => {
                (Some((last.lambda_est - c.lambda_est).abs()), Some((last.sup_v - c.sup_v).abs()))
            }
            _ => (None, None),
        }
    } else {
        (None, None)
    };
    let (thresholds, _) = threshold_block(cfg, &op, last.lambda_est)?;
    let completed = rep.aborted.is_none();
    let summary = json!({
        "stages": rep.stages,
        "aborted": rep.aborted,
        "blow_up_detected": rep.blow_up_detected,
        "final": {
            "p": last.p,
            "converged": last.converged,
            "lambda_est": Quantity { value: last.lambda_est, resolution: res, est_error: lambda_err },
            "el_residual": Quantity { value: last.el_residual, resolution: res, est_error: None },
            "sup_v": Quantity { value: last.sup_v, resolution: res, est_error: sup_err },
            "inf_v": last.inf_v,
            "profile": final_profile,
        },
        "thresholds": thresholds,
        "weight": cfg.k_spec.validate(&params)?,
        "profiles": profiles,
    });
    Ok((op, rep, summary, completed))
}

pub fn continue_cmd(cfg: &RunConfig, out: &Path) -> Result<CommandOutput> {
    let (op, _, summary, completed) = continuation_summary(cfg, out)?;
    Ok(CommandOutput { passed: completed, resolution: resolution_info(&op, &cfg.quadrature), result: summary })
}

pub fn diagnose(cfg: &RunConfig, out: &Path) -> Result<CommandOutput> {
    let params = cfg.params;
    let (op, rep, summary, completed) = continuation_summary(cfg, out)?;
    let mut reports: Vec<ConcentrationReport> = Vec::new();
    let mut sups = Vec::new();
    for v in &rep.profiles {
        reports.push(concentration_report(v, op.sphere(), &params, &sups)?);
        sups.push(v.sup());
    }
    let (last, v) = rep.final_state().expect("summary checked for stages");
    let rescale = RescaleParams::new(&params, last.p, v.sup())?;
    let radii: Vec<f64> = reports.iter().map(|r| r.half_mass_radius).collect();
    let result = json!({
        "continuation": summary,
        "concentration": reports,
        "half_mass_radius_shrinking": radii.windows(2).all(|w| w[1] < w[0]),
        "rescaling": rescale,
        "half_mass_radius_resolution": op.sphere().spacing(),
    });
    Ok(CommandOutput { passed: completed, resolution: resolution_info(&op, &cfg.quadrature), result })
}
