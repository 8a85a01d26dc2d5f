//! Poisson-type kernels on the half-space and on the unit ball.

use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, norm_sq, BallPoint, HalfSpacePoint, ProblemParams};

/// Constants shared by every kernel evaluation for one parameter pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConstants {
    /// Normalization `c_{n,a}` of the half-space kernel.
    pub c_na: f64,
    /// Prefactor `2^{a-1} c_{n,a}` of the ball kernel.
    pub ball_prefactor: f64,
    one_minus_a: f64,
    half_decay: f64,
}

impl KernelConstants {
    pub fn new(params: &ProblemParams) -> Self {
        let c_na = normalization_constant(params);
        let a = params.a();
        KernelConstants {
            c_na,
            ball_prefactor: 2f64.powf(a - 1.0) * c_na,
            one_minus_a: 1.0 - a,
            half_decay: 0.5 * (params.n() as f64 - a),
        }
    }

    /// Half-space kernel from the squared tangential distance and the height.
    #[inline]
    pub fn halfspace_unchecked(&self, tangential_dist_sq: f64, x_n: f64) -> f64 {
        self.c_na
            * x_n.powf(self.one_minus_a)
            * (tangential_dist_sq + x_n * x_n).powf(-self.half_decay)
    }

    /// `|ξ - η|^{-(n-a)}` from the squared distance.
    #[inline]
    pub fn ball_dist_factor(&self, dist_sq: f64) -> f64 {
        dist_sq.powf(-self.half_decay)
    }

    /// Ball kernel from `1 - |ξ|^2` and `|ξ - η|^2`.
    #[inline]
    pub fn ball_unchecked(&self, one_minus_r2: f64, dist_sq: f64) -> f64 {
        self.ball_prefactor * one_minus_r2.powf(self.one_minus_a) * dist_sq.powf(-self.half_decay)
    }
}

/// `c_{n,a} = Γ((n-a)/2) / (π^{(n-1)/2} Γ((1-a)/2))`.
///
/// Substituting `y' = x' + x_n z` reduces the normalization integral to
/// `|S^{n-2}| ∫_0^∞ r^{n-2} (1 + r^2)^{-(n-a)/2} dr`, a Beta integral.
pub fn normalization_constant(params: &ProblemParams) -> f64 {
    let n = params.n() as f64;
    let a = params.a();
    gamma(0.5 * (n - a)) / (PI.powf(0.5 * (n - 1.0)) * gamma(0.5 * (1.0 - a)))
}

/// `P_a(y', x) = c x_n^{1-a} (|x' - y'|^2 + x_n^2)^{-(n-a)/2}`.
pub fn kernel_halfspace(y_prime: &[f64], x: &HalfSpacePoint, params: &ProblemParams) -> Result<f64> {
    if !(x.x_n > 0.0) {
        return Err(Error::domain(format!(
            "half-space kernel needs an interior point, got x_n = {}",
            x.x_n
        )));
    }
    check_dim(y_prime.len() + 1, params)?;
    check_dim(x.dim(), params)?;
    let k = KernelConstants::new(params);
    Ok(k.halfspace_unchecked(dist_sq(&x.x_prime, y_prime), x.x_n))
}

/// `P̃_a(η, ξ) = 2^{a-1} c (1 - |ξ|^2)^{1-a} |ξ - η|^{-(n-a)}`.
pub fn kernel_ball(eta: &BallPoint, xi: &BallPoint, params: &ProblemParams) -> Result<f64> {
    check_dim(eta.dim(), params)?;
    check_dim(xi.dim(), params)?;
    let r2 = norm_sq(&xi.xi);
    if r2 >= 1.0 {
        return Err(Error::domain("ball kernel needs |xi| < 1"));
    }
    let d2 = dist_sq(&xi.xi, &eta.xi);
    if d2 == 0.0 {
        return Err(Error::domain("ball kernel is singular at xi = eta"));
    }
    let k = KernelConstants::new(params);
    Ok(k.ball_unchecked(1.0 - r2, d2))
}

fn check_dim(dim: usize, params: &ProblemParams) -> Result<()> {
    if dim != params.n() {
        return Err(Error::domain(format!(
            "point has dimension {dim}, expected {}",
            params.n()
        )));
    }
    Ok(())
}
