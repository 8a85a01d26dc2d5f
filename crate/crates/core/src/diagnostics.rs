//! The bubble family, the blow-up rescaling of a concentrating profile, and
//! a concentration detector for solver outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, ProblemParams};
use crate::operators::BoundaryFunction;
use crate::quadrature::{neumaier_sum, SphereQuadrature};

/// `amplitude · (λ² + |y' - center|²)^{-(n+a-2)/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub lambda_scale: f64,
    pub center: Vec<f64>,
    pub amplitude: f64,
}

impl BubbleParams {
    pub fn new(lambda_scale: f64, center: Vec<f64>, amplitude: f64) -> Result<Self> {
        if !(lambda_scale > 0.0) || !(amplitude > 0.0) {
            return Err(Error::InvalidParams(format!(
                "bubble needs lambda_scale > 0 and amplitude > 0, got {lambda_scale} and {amplitude}"
            )));
        }
        Ok(BubbleParams { lambda_scale, center, amplitude })
    }

    /// The standard bubble `(1 + |y'|²)^{-(n+a-2)/2}` centred at the origin.
    pub fn standard(params: &ProblemParams) -> Self {
        BubbleParams { lambda_scale: 1.0, center: vec![0.0; params.n() - 1], amplitude: 1.0 }
    }

    /// The bubble with `u(0) = λ^{-(n+a-2)/2}` that rescales to the standard one:
    /// amplitude `λ^{(n+a-2)/2}`.
    pub fn concentrating(params: &ProblemParams, lambda_scale: f64) -> Result<Self> {
        let s = 0.5 * params.conformal_exponent();
        Self::new(lambda_scale, vec![0.0; params.n() - 1], lambda_scale.powf(s))
    }
}

pub fn bubble(y_prime: &[f64], params: &ProblemParams, bp: &BubbleParams) -> f64 {
    let s = 0.5 * params.conformal_exponent();
    bp.amplitude * (bp.lambda_scale * bp.lambda_scale + dist_sq(y_prime, &bp.center)).powf(-s)
}

/// The boundary function `v` on the sphere whose conformal pullback is the
/// bubble, `u(y') = (√2/|y' + e_n|)^{n+a-2} v(F(y', 0))`:
///
/// `v(η) = amplitude · ((λ² + |c|²)(1 + η_n) + (1 - η_n) - 2 η'·c)^{-(n+a-2)/2}`.
///
/// The closed form is valid at every point of the sphere, including `-e_n`.
pub fn bubble_on_sphere(eta: &[f64], params: &ProblemParams, bp: &BubbleParams) -> f64 {
    let n = eta.len();
    let s = 0.5 * params.conformal_exponent();
    let c2: f64 = bp.center.iter().map(|c| c * c).sum();
    let dot: f64 = eta[..n - 1].iter().zip(&bp.center).map(|(e, c)| e * c).sum();
    let l2 = bp.lambda_scale * bp.lambda_scale;
    let d = (l2 + c2) * (1.0 + eta[n - 1]) + (1.0 - eta[n - 1]) - 2.0 * dot;
    bp.amplitude * d.powf(-s)
}

/// Parameters of `φ(y') = u(0)^{-1} u(u(0)^{p - p_bulk} y')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescaleParams {
    pub p: f64,
    pub u0: f64,
    pub scale: f64,
}

impl RescaleParams {
    pub fn new(params: &ProblemParams, p: f64, u0: f64) -> Result<Self> {
        if !(u0 > 0.0) || !u0.is_finite() {
            return Err(Error::domain(format!("rescaling needs u(0) > 0, got {u0}")));
        }
        Ok(RescaleParams { p, u0, scale: u0.powf(p - params.p_bulk()) })
    }
}

/// The blow-up rescaling of `u` about the origin at exponent `p`.
pub fn blow_up_rescale<'a>(
    u: &'a dyn Fn(&[f64]) -> f64,
    params: &ProblemParams,
    p: f64,
) -> Result<(RescaleParams, impl Fn(&[f64]) -> f64 + 'a)> {
    let origin = vec![0.0; params.n() - 1];
    let rp = RescaleParams::new(params, p, u(&origin))?;
    let phi = move |y: &[f64]| {
        if y.iter().all(|c| *c == 0.0) {
            return 1.0;
        }
        let z: Vec<f64> = y.iter().map(|c| c * rp.scale).collect();
        u(&z) / rp.u0
    };
    Ok((rp, phi))
}

/// Concentration summary of a boundary function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub sup_v: f64,
    pub argmax: Vec<f64>,
    pub sup_inf_ratio: f64,
    /// Geodesic radius `r` of the smallest pair of caps, about the maximum
    /// and its antipode, that carries half of `∫ v^{p_crit}`.
    pub half_mass_radius: f64,
    /// `sup v` of each stage divided by that of the previous stage.
    pub growth_rates: Vec<f64>,
}

/// `stage_sups` lists `sup v` over earlier continuation stages, oldest first.
pub fn concentration_report(
    v: &BoundaryFunction,
    quad: &SphereQuadrature,
    params: &ProblemParams,
    stage_sups: &[f64],
) -> Result<ConcentrationReport> {
    let vals = v.values();
    let (imax, sup) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) });
    let inf = v.inf();
    let center = &quad.nodes()[imax];
    // caps are paired around the maximum and its antipode: a single cap
    // around an antipodal profile always needs a whole hemisphere
    let mut by_distance: Vec<(f64, f64)> = quad
        .nodes()
        .iter()
        .zip(vals)
        .zip(quad.weights())
        .map(|((x, val), w)| {
            let dot: f64 = x.iter().zip(center).map(|(a, b)| a * b).sum();
            (dot.abs().min(1.0).acos(), w * val.abs().powf(params.p_crit()))
        })
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = neumaier_sum(by_distance.iter().map(|x| x.1));
    let mut acc = 0.0;
    let mut radius = std::f64::consts::PI;
    for (d, m) in &by_distance {
        acc += m;
        if acc >= 0.5 * total * (1.0 - 1e-12) {
            radius = *d;
            break;
        }
    }
    let mut sups = stage_sups.to_vec();
    sups.push(sup);
    let growth_rates = sups.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(ConcentrationReport {
        sup_v: sup,
        argmax: center.clone(),
        sup_inf_ratio: sup / inf,
        half_mass_radius: radius,
        growth_rates,
    })
}
