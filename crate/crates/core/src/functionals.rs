//! Norms, the weighted isoperimetric ratio
//! `I(v, K) = ∫_{B_1} |𝒫̃_a v|^{p_bulk} / (∫_{∂B_1} K |v|^{p_crit})^{n/(n-1)}`,
//! estimates of the sharp constant in `‖𝒫̃_a v‖_{p_bulk} ≤ S ‖v‖_{p_crit}`,
//! and the two existence thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ProblemParams;
use crate::operators::{extension_of_constant, BoundaryFunction, ExtensionField, ExtensionOperator};
use crate::quadrature::{integrate_adaptive, integrate_ball, integrate_boundary, BallQuadrature, SphereDescriptor, SphereQuadrature};
use crate::solver::{self, SolverSettings, SubcriticalProblem};

/// Tolerance of the antipodal symmetry check on `K`.
pub const ANTIPODAL_TOL: f64 = 1e-12;

/// A positive weight `K` sampled on a sphere rule.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    values: Vec<f64>,
    antipodal: bool,
    quad: SphereDescriptor,
}

impl WeightFunction {
    /// Checks positivity, and antipodal symmetry when `antipodal` is set.
    pub fn new(values: Vec<f64>, quad: &SphereQuadrature, antipodal: bool) -> Result<Self> {
        crate::error::check_len(quad.len(), values.len())?;
        if let Some(bad) = values.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
            return Err(Error::Weight(format!("K must be positive and finite, found {bad}")));
        }
        if antipodal {
            for (i, &j) in quad.antipode_index().iter().enumerate() {
                if (values[i] - values[j]).abs() > ANTIPODAL_TOL {
                    return Err(Error::Weight(format!(
                        "antipodality violated: K differs by {:e} between antipodal nodes",
                        (values[i] - values[j]).abs()
                    )));
                }
            }
        }
        Ok(WeightFunction { values, antipodal, quad: quad.descriptor() })
    }

    pub fn from_fn(quad: &SphereQuadrature, f: impl Fn(&[f64]) -> f64, antipodal: bool) -> Result<Self> {
        Self::new(quad.nodes().iter().map(|x| f(x)).collect(), quad, antipodal)
    }

    pub fn constant(quad: &SphereQuadrature, c: f64) -> Result<Self> {
        Self::new(vec![c; quad.len()], quad, true)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_antipodal(&self) -> bool {
        self.antipodal
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(WeightFunction { values: self.values.iter().map(|k| k * c).collect(), ..self.clone() })
            .and_then(|w| if c > 0.0 { Ok(w) } else { Err(Error::Weight("scale must be positive".into())) })
    }

    pub(crate) fn check_on(&self, quad: &SphereQuadrature) -> Result<()> {
        if self.quad != quad.descriptor() {
            return Err(Error::QuadratureMismatch);
        }
        Ok(())
    }
}

/// `(∫ K |v|^p ds)^{1/p}`, with `K ≡ 1` when absent.
pub fn boundary_norm(v: &BoundaryFunction, p: f64, k: Option<&WeightFunction>, quad: &SphereQuadrature) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParams(format!("norm exponent must be at least 1, got {p}")));
    }
    v.antipodal_reflection(quad)?;
    let vals: Vec<f64> = match k {
        Some(k) => {
            k.check_on(quad)?;
            v.values().iter().zip(k.values()).map(|(x, kk)| kk * x.abs().powf(p)).collect()
        }
        None => v.values().iter().map(|x| x.abs().powf(p)).collect(),
    };
    Ok(integrate_boundary(&vals, quad)?.powf(1.0 / p))
}

/// `(∫_{B_1} |F|^q dξ)^{1/q}`.
pub fn bulk_norm(f: &ExtensionField, q: f64, ball: &BallQuadrature) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParams(format!("norm exponent must be at least 1, got {q}")));
    }
    f.check_on(ball)?;
    let vals: Vec<f64> = f.values().iter().map(|x| x.abs().powf(q)).collect();
    Ok(integrate_ball(&vals, ball)?.powf(1.0 / q))
}

/// `I(v, K)` on the operator's rules.
pub fn isoperimetric_ratio(v: &BoundaryFunction, k: &WeightFunction, op: &ExtensionOperator) -> Result<f64> {
    let params = op.params();
    let quad = op.sphere();
    k.check_on(quad)?;
    let num = solver::functional(op, v)?;
    let den = boundary_norm(v, params.p_crit(), Some(k), quad)?.powf(params.p_crit());
    if !(den > 0.0) {
        return Err(Error::domain("isoperimetric ratio of the zero function"));
    }
    Ok(num / den.powf(params.ratio_exponent()))
}

/// `‖𝒫̃_a v‖_{p_bulk} / ‖v‖_{p_crit}` on the operator's rules.
pub fn sobolev_trace_ratio(v: &BoundaryFunction, op: &ExtensionOperator) -> Result<f64> {
    let params = op.params();
    let e = op.extend(v)?;
    let num = bulk_norm(&e, params.p_bulk(), op.ball())?;
    let den = boundary_norm(v, params.p_crit(), None, op.sphere())?;
    if !(den > 0.0) {
        return Err(Error::domain("trace ratio of the zero function"));
    }
    Ok(num / den)
}

/// How a sharp-constant estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpMethod {
    /// Closed form `n^{-(n-2)/(2(n-1))} ω_n^{-(n-2)/(2n(n-1))}` for `a = 0`, `n ≥ 3`.
    FormulaA0,
    /// `‖𝒫̃_a 1‖_{p_bulk} / ‖1‖_{p_crit}` by adaptive radial integration.
    ConstantTestFunction,
    /// Maximum of the discrete ratio over antipodal `v`, by the fixed-point solver.
    NumericalMaximization,
}

/// A sharp-constant estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpConstant {
    pub s_est: f64,
    pub method: SharpMethod,
    /// Sphere resolution for discrete methods.
    pub resolution: Option<usize>,
    pub est_error: f64,
}

/// Discretization used by [`SharpMethod::NumericalMaximization`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpSettings {
    pub sphere_resolution: usize,
    pub radial_points: usize,
    pub solver: SolverSettings,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SharpSettings {
    fn default() -> Self {
        SharpSettings {
            sphere_resolution: 128,
            radial_points: 3,
            solver: SolverSettings { tol_v: 1e-10, max_iter: 2000, ..Default::default() },
            starts: 2,
            seed: 0,
        }
    }
}

/// Estimates `S_{n,a}` by the chosen method.
pub fn sharp_constant(params: &ProblemParams, method: SharpMethod, settings: &SharpSettings) -> Result<SharpConstant> {
    match method {
        SharpMethod::FormulaA0 => {
            let n = params.n() as f64;
            if params.a() != 0.0 || params.n() < 3 {
                return Err(Error::InvalidParams("the closed form applies to a = 0 and n >= 3 only".into()));
            }
            let omega = params.ball_volume();
            let s = n.powf(-(n - 2.0) / (2.0 * (n - 1.0))) * omega.powf(-(n - 2.0) / (2.0 * n * (n - 1.0)));
            Ok(SharpConstant { s_est: s, method, resolution: None, est_error: 0.0 })
        }
        SharpMethod::ConstantTestFunction => {
            let (bulk, err) = constant_bulk_energy(params)?;
            let pb = params.p_bulk();
            let s = bulk.powf(1.0 / pb) / params.sphere_area().powf(1.0 / params.p_crit());
            Ok(SharpConstant { s_est: s, method, resolution: None, est_error: s * err / (pb * bulk) })
        }
        SharpMethod::NumericalMaximization => {
            let (s, _) = maximize_trace_ratio(params, settings, settings.sphere_resolution)?;
            let (coarse, _) = maximize_trace_ratio(params, settings, settings.sphere_resolution / 2)?;
            Ok(SharpConstant {
                s_est: s,
                method,
                resolution: Some(settings.sphere_resolution),
                est_error: (s - coarse).abs(),
            })
        }
    }
}

/// `∫_{B_1} (𝒫̃_a 1)^{p_bulk} dξ` by adaptive radial integration, with an error estimate.
pub fn constant_bulk_energy(params: &ProblemParams) -> Result<(f64, f64)> {
    let pb = params.p_bulk();
    let n = params.n() as i32;
    let failure = std::cell::Cell::new(None);
    let f = |r: f64| match extension_of_constant(params, r) {
        Ok(m) => m.powf(pb) * r.powi(n - 1),
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    // the profile varies on the scale 1 - r near the sphere
    let mut total = 0.0;
    let mut err = 0.0;
    let mut lo = 0.0;
    for k in 1..=40 {
        let hi = 1.0 - 0.5f64.powi(k);
        let (v, e) = integrate_adaptive(&f, lo, hi, 1e-12 * (hi - lo), 1e-11)?;
        total += v;
        err += e;
        lo = hi;
    }
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let area = params.sphere_area();
    Ok((area * total, area * err))
}

fn maximize_trace_ratio(params: &ProblemParams, settings: &SharpSettings, resolution: usize) -> Result<(f64, f64)> {
    use crate::operators::Backend;
    use crate::quadrature::{build_ball_quadrature, build_sphere_quadrature};
    let sphere = build_sphere_quadrature(params, resolution)?;
    let ball = build_ball_quadrature(params, settings.radial_points, resolution)?;
    let op = ExtensionOperator::new(params, sphere, ball, Backend::Auto)?;
    let k = WeightFunction::constant(op.sphere(), 1.0)?;
    let problem = SubcriticalProblem::new(&op, k, params.p_crit(), settings.solver)?;
    let mut inits = vec![BoundaryFunction::constant(op.sphere(), 1.0)?];
    inits.extend(solver::multistart_inits(op.sphere(), settings.starts.saturating_sub(1), settings.seed, 0.3)?);
    let mut best: Option<(f64, f64)> = None;
    for init in &inits {
        let run = solver::maximize(&problem, init)?;
        // at ∫ v^{p_crit} = 1 the ratio is J^{1/p_bulk}
        let s = run.state.lambda_est.powf(1.0 / params.p_bulk());
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, run.el_residual));
        }
    }
    best.ok_or_else(|| Error::Solver("no maximization start".into()))
}

/// Outcome of the pinching test `max K / min K < 2^{1/n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceCheck {
    pub holds: bool,
    pub ratio: f64,
    pub bound: f64,
    /// `bound - ratio`; positive when the condition holds.
    pub margin: f64,
}

pub fn existence_condition(k: &WeightFunction, params: &ProblemParams) -> ExistenceCheck {
    let ratio = k.max() / k.min();
    let bound = 2f64.powf(1.0 / params.n() as f64);
    ExistenceCheck { holds: ratio < bound, ratio, bound, margin: bound - ratio }
}

/// `S^{p_bulk} / ((min K)^{n/(n-1)} 2^{1/(n-1)})`.
pub fn lambda_threshold(k: &WeightFunction, params: &ProblemParams, s_est: f64) -> f64 {
    let n = params.n() as f64;
    s_est.powf(params.p_bulk()) / (k.min().powf(params.ratio_exponent()) * 2f64.powf(1.0 / (n - 1.0)))
}

/// A reported number with the resolution it was computed at and an error estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub quantity: String,
    pub value: f64,
    pub resolution: usize,
    pub est_error: f64,
}

/// Evaluates `f` at `resolution` and `resolution / 2`; the error estimate
/// is the difference of the two.
pub fn richardson_estimate(quantity: &str, resolution: usize, f: impl Fn(usize) -> Result<f64>) -> Result<Estimate> {
    let fine = f(resolution)?;
    let coarse = f(resolution / 2)?;
    Ok(Estimate { quantity: quantity.to_string(), value: fine, resolution, est_error: (fine - coarse).abs() })
}

/// `I(1, 1)` for the radial profile, `∫ (𝒫̃_a 1)^{p_bulk} / |∂B_1|^{n/(n-1)}`.
pub fn constant_isoperimetric_ratio(params: &ProblemParams) -> Result<f64> {
    let (bulk, _) = constant_bulk_energy(params)?;
    Ok(bulk / params.sphere_area().powf(params.ratio_exponent()))
}
