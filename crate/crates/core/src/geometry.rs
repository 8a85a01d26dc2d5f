//! Points of the closed upper half-space and the closed unit ball, the Möbius
//! map between them, and the power weights that intertwine the two models.
//!
//! The map `F(x) = 2(x + e_n)/|x + e_n|^2 - e_n` is an inversion about `-e_n`
//! followed by a shift, so it is its own inverse on `R^n \ {-e_n}`. Both
//! directions are evaluated through the algebraically simplified form
//! `F(x) = (2x', 1 - |x|^2) / |x + e_n|^2`, which makes the boundary
//! restriction agree with [`stereographic`] to the last bit.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Absolute tolerance for geometric predicates on unit-scale quantities.
pub const GEOMETRIC_TOL: f64 = 1e-12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    n: usize,
    a: f64,
}

/// Dimension, kernel parameter and the exponents derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParamsOut")]
pub struct ProblemParams {
    n: usize,
    a: f64,
    p_crit: f64,
    p_bulk: f64,
    q_exp: f64,
    s_exp: f64,
}

#[derive(Serialize)]
struct RawParamsOut {
    n: usize,
    a: f64,
}

impl From<ProblemParams> for RawParamsOut {
    fn from(p: ProblemParams) -> Self {
        RawParamsOut { n: p.n, a: p.a }
    }
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ProblemParams::new(raw.n, raw.a)
    }
}

impl ProblemParams {
    pub fn new(n: usize, a: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParams(format!(
                "dimension n must be at least 2, got {n}"
            )));
        }
        let nf = n as f64;
        if !a.is_finite() || a <= 2.0 - nf || a >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "a must lie in (2−n, 1) = ({}, 1), got {a}",
                2.0 - nf
            )));
        }
        let d = nf + a - 2.0;
        Ok(ProblemParams {
            n,
            a,
            p_crit: 2.0 * (nf - 1.0) / d,
            p_bulk: 2.0 * nf / d,
            q_exp: (nf - a + 2.0) / d,
            s_exp: (nf - a) / d,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Boundary exponent `2(n-1)/(n+a-2)`.
    pub fn p_crit(&self) -> f64 {
        self.p_crit
    }

    /// Bulk exponent `2n/(n+a-2)`.
    pub fn p_bulk(&self) -> f64 {
        self.p_bulk
    }

    /// Power applied to the extension inside the adjoint, `(n-a+2)/(n+a-2)`.
    pub fn q_exp(&self) -> f64 {
        self.q_exp
    }

    /// Power of `v` on the left of the integral equation, `(n-a)/(n+a-2)`.
    pub fn s_exp(&self) -> f64 {
        self.s_exp
    }

    /// `n + a - 2`, the conformal weight exponent.
    pub fn conformal_exponent(&self) -> f64 {
        self.n as f64 + self.a - 2.0
    }

    /// Exponent `n/(n-1)` applied to boundary integrals in the isoperimetric ratio.
    pub fn ratio_exponent(&self) -> f64 {
        let nf = self.n as f64;
        nf / (nf - 1.0)
    }

    /// Surface measure of the unit sphere `∂B_1 ⊂ R^n`.
    pub fn sphere_area(&self) -> f64 {
        unit_sphere_area(self.n)
    }

    /// Volume of the unit ball `B_1 ⊂ R^n`.
    pub fn ball_volume(&self) -> f64 {
        unit_sphere_area(self.n) / self.n as f64
    }
}

/// `|S^{d-1}| = 2 π^{d/2} / Γ(d/2)` for the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0),
    }
}

/// A point `x = (x', x_n)` of the closed upper half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpacePoint {
    pub x_prime: Vec<f64>,
    pub x_n: f64,
}

impl HalfSpacePoint {
    pub fn new(x_prime: Vec<f64>, x_n: f64) -> Result<Self> {
        if !x_n.is_finite() || x_n < 0.0 || x_prime.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain(format!(
                "half-space point needs finite coordinates and x_n >= 0, got x_n = {x_n}"
            )));
        }
        Ok(HalfSpacePoint { x_prime, x_n })
    }

    pub fn boundary(y_prime: Vec<f64>) -> Result<Self> {
        Self::new(y_prime, 0.0)
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.x_prime.len() + 1
    }

    pub fn is_interior(&self) -> bool {
        self.x_n > 0.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.x_prime.clone();
        v.push(self.x_n);
        v
    }

    /// `|x + e_n|^2`.
    pub fn shifted_norm_sq(&self) -> f64 {
        norm_sq(&self.x_prime) + (self.x_n + 1.0) * (self.x_n + 1.0)
    }

    pub fn translated(&self, shift: &[f64]) -> Self {
        HalfSpacePoint {
            x_prime: self.x_prime.iter().zip(shift).map(|(x, t)| x + t).collect(),
            x_n: self.x_n,
        }
    }
}

/// A point of the closed unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPoint {
    pub xi: Vec<f64>,
}

impl BallPoint {
    pub fn new(xi: Vec<f64>) -> Result<Self> {
        if xi.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("ball point has non-finite coordinates"));
        }
        if norm_sq(&xi).sqrt() > 1.0 + GEOMETRIC_TOL {
            return Err(Error::domain(format!(
                "point lies outside the closed unit ball (|xi| = {})",
                norm_sq(&xi).sqrt()
            )));
        }
        Ok(BallPoint { xi })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.xi).sqrt()
    }

    pub fn is_interior(&self) -> bool {
        self.norm() < 1.0
    }

    /// The north pole `e_n`.
    pub fn north_pole(n: usize) -> Self {
        let mut xi = vec![0.0; n];
        xi[n - 1] = 1.0;
        BallPoint { xi }
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The Möbius map `F` from the closed half-space onto the closed ball.
pub fn mobius_f(x: &HalfSpacePoint) -> BallPoint {
    let denom = x.shifted_norm_sq();
    let r2 = norm_sq(&x.x_prime) + x.x_n * x.x_n;
    let mut xi: Vec<f64> = x.x_prime.iter().map(|c| 2.0 * c / denom).collect();
    xi.push((1.0 - r2) / denom);
    BallPoint { xi }
}

/// Inverse of [`mobius_f`]. The pole `-e_n` is the image of the point at
/// infinity and is rejected.
pub fn mobius_f_inverse(xi: &BallPoint) -> Result<HalfSpacePoint> {
    let n = xi.dim();
    let (head, last) = xi.xi.split_at(n - 1);
    let denom = norm_sq(head) + (last[0] + 1.0) * (last[0] + 1.0);
    if denom <= GEOMETRIC_TOL * GEOMETRIC_TOL {
        return Err(Error::domain(
            "-e_n is the image of the point at infinity and has no preimage",
        ));
    }
    let r2 = norm_sq(&xi.xi);
    let x_prime = head.iter().map(|c| 2.0 * c / denom).collect();
    // x_n = (1 - |xi|^2)/|xi + e_n|^2; clamp the roundoff of boundary points
    let x_n = ((1.0 - r2) / denom).max(0.0);
    Ok(HalfSpacePoint { x_prime, x_n })
}

/// Inverse stereographic projection `y' ↦ (2y', 1 - |y'|^2)/(1 + |y'|^2)`.
pub fn stereographic(y_prime: &[f64]) -> BallPoint {
    let r2 = norm_sq(y_prime);
    let denom = r2 + 1.0;
    let mut xi: Vec<f64> = y_prime.iter().map(|c| 2.0 * c / denom).collect();
    xi.push((1.0 - r2) / denom);
    BallPoint { xi }
}

/// `(√2 / |x + e_n|)^{n+a-2}`.
pub fn conformal_weight(x: &HalfSpacePoint, params: &ProblemParams) -> f64 {
    (2.0 / x.shifted_norm_sq()).powf(0.5 * params.conformal_exponent())
}

pub fn antipode(eta: &BallPoint) -> BallPoint {
    BallPoint {
        xi: eta.xi.iter().map(|c| -c).collect(),
    }
}
