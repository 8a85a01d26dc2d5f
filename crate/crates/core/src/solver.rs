//! Constrained maximization of `J(v) = ∫_{B_1} (𝒫̃_a v)^{p_bulk}` over
//! nonnegative antipodal `v` with `∫ K v^p = 1`, and continuation of the
//! maximizers as `p` decreases to the critical exponent.
//!
//! The iteration is the nonlinear power map suggested by the Euler–Lagrange
//! equation `λ K v^{p-1} = 𝒯̃_a[(𝒫̃_a v)^{q}]`: compute the right-hand side
//! `G`, set `w = (G/K)^{1/(p-1)}`, mix with the current iterate, symmetrize
//! and renormalize. Steps that lower `J` are retried with half the damping.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::WeightFunction;
use crate::operators::{BoundaryFunction, ExtensionOperator};
use crate::quadrature::{integrate_ball, integrate_boundary, SphereQuadrature};

/// Iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop when `‖v_{k+1} - v_k‖_∞ / ‖v_k‖_∞` falls below this.
    pub tol_v: f64,
    pub max_iter: usize,
    /// Initial damping `τ` of each step.
    pub damping: f64,
    pub max_halvings: usize,
    /// Largest decrease of `J` an accepted step may cause.
    pub ascent_slack: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol_v: 1e-9, max_iter: 5000, damping: 1.0, max_halvings: 20, ascent_slack: 1e-12 }
    }
}

/// One maximization problem at a fixed exponent `p`.
#[derive(Debug)]
pub struct SubcriticalProblem<'a> {
    op: &'a ExtensionOperator,
    k: WeightFunction,
    p: f64,
    settings: SolverSettings,
}

impl<'a> SubcriticalProblem<'a> {
    /// `p` may equal the critical exponent here; [`maximize_subcritical`]
    /// insists on `p > p_crit`.
    pub fn new(op: &'a ExtensionOperator, k: WeightFunction, p: f64, settings: SolverSettings) -> Result<Self> {
        let params = op.params();
        if !(p >= params.p_crit() && p < params.p_bulk()) {
            return Err(Error::InvalidParams(format!(
                "p must lie in [p_crit, p_bulk) = [{}, {}), got {p}",
                params.p_crit(),
                params.p_bulk()
            )));
        }
        k.check_on(op.sphere())?;
        if !k.is_antipodal() {
            return Err(Error::Weight("the solver needs an antipodally symmetric K".into()));
        }
        Ok(SubcriticalProblem { op, k, p, settings })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.k
    }

    pub fn operator(&self) -> &ExtensionOperator {
        self.op
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }
}

/// Current iterate with its functional value.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub v: BoundaryFunction,
    /// `∫ (𝒫̃_a v)^{p_bulk}`, the multiplier at a normalized critical point.
    pub lambda_est: f64,
    pub iteration: usize,
    /// Relative sup-norm change of the last accepted step.
    pub residual: f64,
    pub functional_history: Vec<f64>,
    extension: Vec<f64>,
}

impl SolverState {
    /// Symmetrizes and normalizes `init` and evaluates the functional.
    pub fn new(problem: &SubcriticalProblem<'_>, init: &BoundaryFunction) -> Result<Self> {
        let quad = problem.op.sphere();
        if init.values().iter().any(|x| *x < 0.0) {
            return Err(Error::domain("initial guess must be nonnegative"));
        }
        let v = normalize_constraint(&symmetrize_antipodal(init, quad)?, &problem.k, problem.p, quad)?;
        let extension = problem.op.extend(&v)?.values().to_vec();
        let lambda_est = bulk_energy(problem.op, &extension)?;
        Ok(SolverState {
            v,
            lambda_est,
            iteration: 0,
            residual: f64::INFINITY,
            functional_history: vec![lambda_est],
            extension,
        })
    }
}

fn bulk_energy(op: &ExtensionOperator, extension: &[f64]) -> Result<f64> {
    let pb = op.params().p_bulk();
    let vals: Vec<f64> = extension.iter().map(|x| x.abs().powf(pb)).collect();
    integrate_ball(&vals, op.ball())
}

/// `J(v) = ∫_{B_1} |𝒫̃_a v|^{p_bulk}` on the operator's rules.
pub fn functional(op: &ExtensionOperator, v: &BoundaryFunction) -> Result<f64> {
    let e = op.extend(v)?;
    bulk_energy(op, e.values())
}

/// `v_i ← (v_i + v_{-i})/2`.
pub fn symmetrize_antipodal(v: &BoundaryFunction, quad: &SphereQuadrature) -> Result<BoundaryFunction> {
    let vals = v.values();
    let out = quad
        .antipode_index()
        .iter()
        .enumerate()
        .map(|(i, &j)| 0.5 * (vals[i] + vals[j]))
        .collect();
    // the reflection below also checks that `v` lives on `quad`
    v.antipodal_reflection(quad)?;
    BoundaryFunction::new(out, quad)
}

/// `v / (∫ K |v|^p)^{1/p}`.
pub fn normalize_constraint(
    v: &BoundaryFunction,
    k: &WeightFunction,
    p: f64,
    quad: &SphereQuadrature,
) -> Result<BoundaryFunction> {
    let c = constraint_value(v, k, p, quad)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain("cannot normalize the zero function"));
    }
    let s = c.powf(-1.0 / p);
    BoundaryFunction::new(v.values().iter().map(|x| x * s).collect(), quad)
}

/// `∫ K |v|^p ds`.
pub fn constraint_value(v: &BoundaryFunction, k: &WeightFunction, p: f64, quad: &SphereQuadrature) -> Result<f64> {
    v.antipodal_reflection(quad)?;
    k.check_on(quad)?;
    let vals: Vec<f64> = v.values().iter().zip(k.values()).map(|(x, kk)| kk * x.abs().powf(p)).collect();
    integrate_boundary(&vals, quad)
}

/// `𝒯̃_a[(𝒫̃_a v)^{q}]` given the extension of `v`.
fn rhs_from_extension(op: &ExtensionOperator, extension: &[f64]) -> Vec<f64> {
    let q = op.params().q_exp();
    let powered: Vec<f64> = extension.iter().map(|x| x.abs().powf(q)).collect();
    op.adjoint_values(&powered)
}

/// Outcome of one damped step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub state: SolverState,
    pub accepted: bool,
    /// Damping of the accepted step, or the last one tried.
    pub damping: f64,
}

/// One damped fixed-point step. If every damping level lowers the
/// functional, the input state is returned with `accepted = false`.
pub fn fixed_point_step(state: &SolverState, problem: &SubcriticalProblem<'_>) -> Result<StepReport> {
    let op = problem.op;
    let quad = op.sphere();
    let p = problem.p;
    let g = rhs_from_extension(op, &state.extension);
    let w_raw: Vec<f64> = g
        .iter()
        .zip(problem.k.values())
        .map(|(gi, ki)| (gi.max(0.0) / ki).powf(1.0 / (p - 1.0)))
        .collect();
    let w = normalize_constraint(&BoundaryFunction::new(w_raw, quad)?, &problem.k, p, quad)?;
    let mut tau = problem.settings.damping;
    for _ in 0..=problem.settings.max_halvings {
        let mixed: Vec<f64> = state
            .v
            .values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| (1.0 - tau) * a + tau * b)
            .collect();
        let cand = normalize_constraint(
            &symmetrize_antipodal(&BoundaryFunction::new(mixed, quad)?, quad)?,
            &problem.k,
            p,
            quad,
        )?;
        let extension = op.extend_values(cand.values());
        let j = bulk_energy(op, &extension)?;
        if j >= state.lambda_est - problem.settings.ascent_slack {
            let vmax = state.v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let change = cand
                .values()
                .iter()
                .zip(state.v.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let mut history = state.functional_history.clone();
            history.push(j);
            return Ok(StepReport {
                state: SolverState {
                    v: cand,
                    lambda_est: j,
                    iteration: state.iteration + 1,
                    residual: change / vmax,
                    functional_history: history,
                    extension,
                },
                accepted: true,
                damping: tau,
            });
        }
        tau *= 0.5;
    }
    Ok(StepReport { state: state.clone(), accepted: false, damping: tau })
}

/// Result of a maximization run.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximizeReport {
    pub state: SolverState,
    pub converged: bool,
    /// Why the run stopped when it did not converge.
    pub failure: Option<String>,
    /// Relative Euler–Lagrange residual with `λ = lambda_est`.
    pub el_residual: f64,
    /// `⟨v, 𝒯̃[(𝒫̃v)^q]⟩ / ⟨v, K v^{p-1}⟩`.
    pub multiplier_from_pairing: f64,
}

/// Runs [`fixed_point_step`] to convergence for `p > p_crit`.
pub fn maximize_subcritical(problem: &SubcriticalProblem<'_>, init: &BoundaryFunction) -> Result<MaximizeReport> {
    if !(problem.p > problem.op.params().p_crit()) {
        return Err(Error::InvalidParams(format!(
            "maximize_subcritical needs p > p_crit = {}, got {}",
            problem.op.params().p_crit(),
            problem.p
        )));
    }
    maximize(problem, init)
}

/// Fixed-point maximization that also accepts `p = p_crit`.
pub fn maximize(problem: &SubcriticalProblem<'_>, init: &BoundaryFunction) -> Result<MaximizeReport> {
    let state = SolverState::new(problem, init)?;
    maximize_from(problem, state)
}

fn maximize_from(problem: &SubcriticalProblem<'_>, mut state: SolverState) -> Result<MaximizeReport> {
    let mut converged = false;
    let mut failure = None;
    while state.iteration < problem.settings.max_iter {
        let step = fixed_point_step(&state, problem)?;
        if !step.accepted {
            failure = Some(format!("damping exhausted at iteration {}", state.iteration));
            break;
        }
        state = step.state;
        if state.residual < problem.settings.tol_v {
            converged = true;
            break;
        }
    }
    if !converged && failure.is_none() {
        failure = Some(format!(
            "no convergence after {} iterations (last change {:e})",
            state.iteration, state.residual
        ));
    }
    let (el, pairing) = residual_and_pairing(problem.op, &state.v, &problem.k, problem.p, Some(state.lambda_est), &state.extension)?;
    Ok(MaximizeReport { state, converged, failure, el_residual: el, multiplier_from_pairing: pairing })
}

fn residual_and_pairing(
    op: &ExtensionOperator,
    v: &BoundaryFunction,
    k: &WeightFunction,
    p: f64,
    lambda: Option<f64>,
    extension: &[f64],
) -> Result<(f64, f64)> {
    let quad = op.sphere();
    let g = rhs_from_extension(op, extension);
    let lhs_base: Vec<f64> = v.values().iter().zip(k.values()).map(|(x, kk)| kk * x.powf(p - 1.0)).collect();
    let num = integrate_boundary(&v.values().iter().zip(&g).map(|(a, b)| a * b).collect::<Vec<_>>(), quad)?;
    let den = integrate_boundary(&v.values().iter().zip(&lhs_base).map(|(a, b)| a * b).collect::<Vec<_>>(), quad)?;
    let pairing = num / den;
    let gmax = g.iter().cloned().fold(0.0, f64::max);
    let res = match lambda {
        Some(l) => lhs_base.iter().zip(&g).fold(0.0f64, |m, (a, b)| m.max((l * a - b).abs())) / gmax,
        None => {
            // rescale v by c with c^{q-(p-1)} = 1/λ so that K (cv)^{p-1} = 𝒯̃[(𝒫̃ cv)^q]
            let q = op.params().q_exp();
            let c = pairing.powf(-1.0 / (q - (p - 1.0)));
            let lhs_scale = c.powf(p - 1.0);
            let rhs_scale = c.powf(q);
            lhs_base
                .iter()
                .zip(&g)
                .fold(0.0f64, |m, (a, b)| m.max((lhs_scale * a - rhs_scale * b).abs()))
                / (rhs_scale * gmax)
        }
    };
    Ok((res, pairing))
}

/// Relative residual of `λ K v^{p-1} = 𝒯̃_a[(𝒫̃_a v)^{q}]`:
/// `sup |λ K v^{p-1} - G| / sup G`. Without `λ` the multiplier is absorbed
/// by rescaling `v` (the pairing with `v` supplies its value) and the
/// equation is evaluated without one.
pub fn el_residual(
    op: &ExtensionOperator,
    v: &BoundaryFunction,
    k: &WeightFunction,
    p: f64,
    lambda: Option<f64>,
) -> Result<f64> {
    if v.values().iter().any(|x| !(*x > 0.0)) {
        return Err(Error::domain("the residual needs a positive v"));
    }
    k.check_on(op.sphere())?;
    let e = op.extend(v)?;
    Ok(residual_and_pairing(op, v, k, p, lambda, e.values())?.0)
}

/// One stage of a continuation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub p: f64,
    pub lambda_est: f64,
    pub el_residual: f64,
    pub sup_v: f64,
    pub inf_v: f64,
    pub iterations: usize,
    pub converged: bool,
    pub blow_up_flag: bool,
}

/// Per-stage results and the final iterate of a continuation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    pub stages: Vec<StageReport>,
    /// Snapshot of `v` after each completed stage.
    pub profiles: Vec<BoundaryFunction>,
    /// Set when a stage failed; the report then covers the stages before it.
    pub aborted: Option<String>,
    pub blow_up_detected: bool,
}

impl ContinuationReport {
    pub fn final_state(&self) -> Option<(&StageReport, &BoundaryFunction)> {
        self.stages.last().zip(self.profiles.last())
    }
}

/// Controls specific to continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSettings {
    pub solver: SolverSettings,
    /// Flag blow-up when `sup v` grows by more than this factor between stages.
    pub blow_up_factor: f64,
    /// Stop `ε_floor` above the critical exponent.
    pub epsilon_floor: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        ContinuationSettings { solver: SolverSettings::default(), blow_up_factor: 2.0, epsilon_floor: 1e-3 }
    }
}

/// A geometric schedule from `p_start` down to `p_crit + ε_floor`.
pub fn default_schedule(op: &ExtensionOperator, p_start: f64, stages: usize, epsilon_floor: f64) -> Vec<f64> {
    let pc = op.params().p_crit();
    let stages = stages.max(1);
    let d0 = (p_start - pc).max(epsilon_floor);
    (0..stages)
        .map(|s| {
            if stages == 1 {
                pc + epsilon_floor
            } else {
                let t = s as f64 / (stages - 1) as f64;
                pc + d0 * (epsilon_floor / d0).powf(t)
            }
        })
        .collect()
}

/// Solves along a decreasing schedule of exponents, warm-starting each
/// stage from the previous one.
pub fn continuation(
    op: &ExtensionOperator,
    k: &WeightFunction,
    schedule: &[f64],
    init: &BoundaryFunction,
    settings: &ContinuationSettings,
) -> Result<ContinuationReport> {
    let params = op.params();
    if schedule.is_empty() {
        return Err(Error::InvalidParams("continuation schedule is empty".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParams("continuation schedule must be strictly decreasing".into()));
    }
    if !(schedule[0] < params.p_bulk()) {
        return Err(Error::InvalidParams(format!(
            "first exponent must lie below p_bulk = {}",
            params.p_bulk()
        )));
    }
    let last = *schedule.last().unwrap();
    if last < params.p_crit() {
        return Err(Error::InvalidParams(format!(
            "last exponent must not lie below p_crit = {}",
            params.p_crit()
        )));
    }
    let mut report = ContinuationReport { stages: Vec::new(), profiles: Vec::new(), aborted: None, blow_up_detected: false };
    let mut current = init.clone();
    for &p in schedule {
        let problem = SubcriticalProblem::new(op, k.clone(), p, settings.solver)?;
        let run = match maximize(&problem, &current) {
            Ok(r) => r,
            Err(e) => {
                report.aborted = Some(format!("stage p = {p}: {e}"));
                break;
            }
        };
        let v = run.state.v.clone();
        let sup = v.sup();
        let blow_up = report
            .stages
            .last()
            .is_some_and(|prev| sup > settings.blow_up_factor * prev.sup_v);
        report.blow_up_detected |= blow_up;
        report.stages.push(StageReport {
            p,
            lambda_est: run.state.lambda_est,
            el_residual: run.el_residual,
            sup_v: sup,
            inf_v: v.inf(),
            iterations: run.state.iteration,
            converged: run.converged,
            blow_up_flag: blow_up,
        });
        report.profiles.push(v.clone());
        if !run.converged {
            report.aborted = Some(format!(
                "stage p = {p}: {}",
                run.failure.unwrap_or_else(|| "did not converge".into())
            ));
            break;
        }
        current = v;
    }
    Ok(report)
}

/// `count` random antipodal initial guesses: i.i.d. log-normal node values
/// with log-standard deviation `sigma`, symmetrized.
pub fn multistart_inits(quad: &SphereQuadrature, count: usize, seed: u64, sigma: f64) -> Result<Vec<BoundaryFunction>> {
    let dist = LogNormal::new(0.0, sigma).map_err(|e| Error::InvalidParams(format!("bad multistart sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let vals: Vec<f64> = (0..quad.len()).map(|_| dist.sample(&mut rng)).collect();
            symmetrize_antipodal(&BoundaryFunction::new(vals, quad)?, quad)
        })
        .collect()
}
