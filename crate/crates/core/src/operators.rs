//! Discretized extension operator `𝒫̃_a` on the ball, its adjoint `𝒯̃_a`, the
//! half-space extension `𝒫_a`, and two numerical invariants: the conformal
//! intertwining of the two models and the weighted harmonicity of `𝒫_a u`.
//!
//! On a sphere rule with nodes `η_i`, weights `w_i` and a ball rule with
//! nodes `ξ_j`, weights `W_j`:
//!
//! ```text
//! (𝒫̃ v)(ξ_j) = Σ_i w_i P̃(η_i, ξ_j) v_i        (𝒯̃ F)(η_i) = Σ_j W_j P̃(η_i, ξ_j) F_j
//! ```
//!
//! Two backends compute these sums. The dense backend loops over all pairs.
//! The ring backend applies when the ball's angular rule equals the sphere
//! rule: the kernel then depends on the azimuthal offset only, and each
//! ring-to-ring block is a circular convolution evaluated with FFTs.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::geometry::{
    conformal_weight, dist_sq, mobius_f, norm_sq, stereographic, unit_sphere_area, BallPoint,
    HalfSpacePoint, ProblemParams,
};
use crate::kernels::KernelConstants;
use crate::quadrature::{
    gauss_legendre, integrate_adaptive, write_nodes_csv, BallDescriptor, BallQuadrature,
    SphereDescriptor, SphereQuadrature,
};

/// Values of a function at the nodes of a sphere rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    values: Vec<f64>,
    quad: SphereDescriptor,
}

impl BoundaryFunction {
    pub fn new(values: Vec<f64>, quad: &SphereQuadrature) -> Result<Self> {
        check_len(quad.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("boundary function has non-finite values"));
        }
        Ok(BoundaryFunction { values, quad: quad.descriptor() })
    }

    pub fn from_fn(quad: &SphereQuadrature, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(quad.nodes().iter().map(|x| f(x)).collect(), quad)
    }

    pub fn constant(quad: &SphereQuadrature, c: f64) -> Result<Self> {
        Self::new(vec![c; quad.len()], quad)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn descriptor(&self) -> SphereDescriptor {
        self.quad
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_on(&self, quad: &SphereQuadrature) -> Result<()> {
        if self.quad != quad.descriptor() {
            return Err(Error::QuadratureMismatch);
        }
        Ok(())
    }

    /// `v ∘ antipode`.
    pub fn antipodal_reflection(&self, quad: &SphereQuadrature) -> Result<Self> {
        self.check_on(quad)?;
        let values = quad.antipode_index().iter().map(|&j| self.values[j]).collect();
        Ok(BoundaryFunction { values, quad: self.quad })
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, quad: &SphereQuadrature, mut out: W) -> Result<()> {
        self.check_on(quad)?;
        write_nodes_csv(&mut out, quad.nodes(), "value", &self.values)
            .map_err(|e| Error::domain(format!("csv write failed: {e}")))
    }
}

/// Values of a function at the nodes of a ball rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionField {
    values: Vec<f64>,
    quad: BallDescriptor,
}

impl ExtensionField {
    pub fn new(values: Vec<f64>, quad: &BallQuadrature) -> Result<Self> {
        check_len(quad.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("extension field has non-finite values"));
        }
        Ok(ExtensionField { values, quad: quad.descriptor() })
    }

    pub fn from_fn(quad: &BallQuadrature, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(quad.nodes().iter().map(|x| f(x)).collect(), quad)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn descriptor(&self) -> BallDescriptor {
        self.quad
    }

    pub(crate) fn check_on(&self, quad: &BallQuadrature) -> Result<()> {
        if self.quad != quad.descriptor() {
            return Err(Error::QuadratureMismatch);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ExtensionField { values: self.values.iter().map(|&v| f(v)).collect(), quad: self.quad }
    }

    pub fn write_csv<W: Write>(&self, quad: &BallQuadrature, mut out: W) -> Result<()> {
        self.check_on(quad)?;
        write_nodes_csv(&mut out, quad.nodes(), "value", &self.values)
            .map_err(|e| Error::domain(format!("csv write failed: {e}")))
    }
}

/// Which summation scheme an [`ExtensionOperator`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Ring backend when the rules are aligned, dense otherwise.
    #[default]
    Auto,
    Dense,
    /// Dense with the full kernel matrix precomputed.
    DenseCached,
    Ring,
}

/// The discrete pair `(𝒫̃_a, 𝒯̃_a)` on a fixed sphere rule and ball rule.
pub struct ExtensionOperator {
    params: ProblemParams,
    consts: KernelConstants,
    sphere: SphereQuadrature,
    ball: BallQuadrature,
    imp: Imp,
}

enum Imp {
    Dense { ball_pre: Vec<f64>, matrix: Option<Vec<f64>> },
    Ring(RingKernel),
}

impl std::fmt::Debug for ExtensionOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtensionOperator")
            .field("params", &self.params)
            .field("sphere", &self.sphere.descriptor())
            .field("ball", &self.ball.descriptor())
            .field("backend", &self.backend())
            .finish()
    }
}

impl ExtensionOperator {
    pub fn new(
        params: &ProblemParams,
        sphere: SphereQuadrature,
        ball: BallQuadrature,
        backend: Backend,
    ) -> Result<Self> {
        if sphere.n() != params.n() || ball.n() != params.n() {
            return Err(Error::QuadratureMismatch);
        }
        let consts = KernelConstants::new(params);
        let aligned = ball.angular().descriptor() == sphere.descriptor();
        let imp = match backend {
            Backend::Ring | Backend::Auto if aligned => {
                Imp::Ring(RingKernel::new(&consts, &sphere, &ball))
            }
            Backend::Ring => {
                return Err(Error::Quadrature(
                    "ring backend needs the ball's angular rule to equal the sphere rule".into(),
                ))
            }
            Backend::Auto | Backend::Dense => Imp::Dense { ball_pre: ball_prefactors(&consts, &ball), matrix: None },
            Backend::DenseCached => {
                let ball_pre = ball_prefactors(&consts, &ball);
                let matrix = dense_matrix(&consts, &sphere, &ball, &ball_pre);
                Imp::Dense { ball_pre, matrix: Some(matrix) }
            }
        };
        Ok(ExtensionOperator { params: *params, consts, sphere, ball, imp })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn sphere(&self) -> &SphereQuadrature {
        &self.sphere
    }

    pub fn ball(&self) -> &BallQuadrature {
        &self.ball
    }

    pub fn kernel_constants(&self) -> &KernelConstants {
        &self.consts
    }

    pub fn backend(&self) -> Backend {
        match &self.imp {
            Imp::Ring(_) => Backend::Ring,
            Imp::Dense { matrix: Some(_), .. } => Backend::DenseCached,
            Imp::Dense { matrix: None, .. } => Backend::Dense,
        }
    }

    /// `𝒫̃_a v` at the ball nodes.
    pub fn extend(&self, v: &BoundaryFunction) -> Result<ExtensionField> {
        v.check_on(&self.sphere)?;
        Ok(ExtensionField { values: self.extend_values(v.values()), quad: self.ball.descriptor() })
    }

    /// `𝒯̃_a F` at the sphere nodes.
    pub fn adjoint(&self, f: &ExtensionField) -> Result<BoundaryFunction> {
        f.check_on(&self.ball)?;
        Ok(BoundaryFunction { values: self.adjoint_values(f.values()), quad: self.sphere.descriptor() })
    }

    pub(crate) fn extend_values(&self, v: &[f64]) -> Vec<f64> {
        match &self.imp {
            Imp::Ring(rk) => rk.extend(v, &self.sphere),
            Imp::Dense { ball_pre, matrix } => {
                let wv: Vec<f64> = v.iter().zip(self.sphere.weights()).map(|(a, b)| a * b).collect();
                let ns = self.sphere.len();
                (0..self.ball.len())
                    .into_par_iter()
                    .map(|j| match matrix {
                        Some(m) => m[j * ns..(j + 1) * ns].iter().zip(&wv).map(|(k, x)| k * x).sum(),
                        None => {
                            let xi = &self.ball.nodes()[j];
                            let mut s = 0.0;
                            for (eta, x) in self.sphere.nodes().iter().zip(&wv) {
                                s += x * self.consts.ball_dist_factor(dist_sq(xi, eta));
                            }
                            s * ball_pre[j]
                        }
                    })
                    .collect()
            }
        }
    }

    pub(crate) fn adjoint_values(&self, f: &[f64]) -> Vec<f64> {
        match &self.imp {
            Imp::Ring(rk) => rk.adjoint(f, &self.ball),
            Imp::Dense { ball_pre, matrix } => {
                let wf: Vec<f64> = f
                    .iter()
                    .zip(self.ball.weights())
                    .zip(ball_pre)
                    .map(|((a, b), c)| a * b * c)
                    .collect();
                let wf_raw: Vec<f64> = f.iter().zip(self.ball.weights()).map(|(a, b)| a * b).collect();
                let ns = self.sphere.len();
                (0..ns)
                    .into_par_iter()
                    .map(|i| match matrix {
                        Some(m) => {
                            let mut s = 0.0;
                            for (j, x) in wf_raw.iter().enumerate() {
                                s += m[j * ns + i] * x;
                            }
                            s
                        }
                        None => {
                            let eta = &self.sphere.nodes()[i];
                            let mut s = 0.0;
                            for (xi, x) in self.ball.nodes().iter().zip(&wf) {
                                s += x * self.consts.ball_dist_factor(dist_sq(xi, eta));
                            }
                            s
                        }
                    })
                    .collect()
            }
        }
    }

    /// `𝒫̃_a v` at arbitrary interior points, by direct summation over the sphere rule.
    pub fn extend_at(&self, v: &BoundaryFunction, points: &[BallPoint]) -> Result<Vec<f64>> {
        v.check_on(&self.sphere)?;
        extend_at(v.values(), &self.sphere, points, &self.params)
    }
}

fn ball_prefactors(consts: &KernelConstants, ball: &BallQuadrature) -> Vec<f64> {
    ball.nodes()
        .iter()
        .map(|xi| consts.ball_unchecked(1.0 - norm_sq(xi), 1.0))
        .collect()
}

fn dense_matrix(
    consts: &KernelConstants,
    sphere: &SphereQuadrature,
    ball: &BallQuadrature,
    ball_pre: &[f64],
) -> Vec<f64> {
    let ns = sphere.len();
    let mut m = vec![0.0; ns * ball.len()];
    m.par_chunks_mut(ns).enumerate().for_each(|(j, row)| {
        let xi = &ball.nodes()[j];
        for (r, eta) in row.iter_mut().zip(sphere.nodes()) {
            *r = ball_pre[j] * consts.ball_dist_factor(dist_sq(xi, eta));
        }
    });
    m
}

/// `Σ_i w_i P̃(η_i, ξ) v_i` at arbitrary interior points `ξ`.
pub fn extend_at(
    values: &[f64],
    sphere: &SphereQuadrature,
    points: &[BallPoint],
    params: &ProblemParams,
) -> Result<Vec<f64>> {
    check_len(sphere.len(), values.len())?;
    let consts = KernelConstants::new(params);
    for p in points {
        if p.dim() != params.n() || norm_sq(&p.xi) >= 1.0 {
            return Err(Error::domain("extension is evaluated at interior points of the ball only"));
        }
    }
    let wv: Vec<f64> = values.iter().zip(sphere.weights()).map(|(a, b)| a * b).collect();
    Ok(points
        .par_iter()
        .map(|p| {
            let mut s = 0.0;
            for (eta, x) in sphere.nodes().iter().zip(&wv) {
                s += x * consts.ball_dist_factor(dist_sq(&p.xi, eta));
            }
            s * consts.ball_unchecked(1.0 - norm_sq(&p.xi), 1.0)
        })
        .collect())
}

/// Precomputed spectra for the ring backend.
struct RingKernel {
    per_ring: usize,
    sphere_rings: usize,
    ball_rings: usize,
    shells: usize,
    /// Real spectra indexed by `((k * ball_rings + j) * sphere_rings + i) * per_ring`.
    spectra: Vec<f64>,
    /// Weight of one ball node on shell `k`, ring `j`.
    ball_ring_weights: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RingKernel {
    fn new(consts: &KernelConstants, sphere: &SphereQuadrature, ball: &BallQuadrature) -> Self {
        let layout = sphere.rings();
        let n_phi = layout.per_ring;
        let rs = layout.rings();
        let ang = ball.angular().rings();
        let rb = ang.rings();
        let shells = ball.radii().len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_phi);
        let inv = planner.plan_fft_inverse(n_phi);

        // cos and sin of the folded offset, so the kernel is exactly even
        let offsets: Vec<(f64, f64)> = (0..n_phi)
            .map(|d| {
                let f = d.min(n_phi - d) as f64;
                let th = 2.0 * PI * f / n_phi as f64;
                (th.cos(), th.sin())
            })
            .collect();
        let ring_geom = |heights: &[f64], i: usize| -> (f64, f64) {
            if heights.is_empty() {
                (1.0, 0.0)
            } else {
                let t = heights[i];
                ((1.0 - t * t).sqrt(), t)
            }
        };

        let blocks = shells * rb * rs;
        let mut spectra = vec![0.0; blocks * n_phi];
        spectra.par_chunks_mut(n_phi).enumerate().for_each(|(blk, out)| {
            let i = blk % rs;
            let j = (blk / rs) % rb;
            let k = blk / (rs * rb);
            let r = ball.radii()[k];
            let (sj, tj) = ring_geom(&ang.heights, j);
            let (si, ti) = ring_geom(&layout.heights, i);
            let one_minus_r2 = (1.0 - r) * (1.0 + r);
            let mut buf: Vec<Complex<f64>> = offsets
                .iter()
                .map(|&(c, s)| {
                    let dx = r * sj * c - si;
                    let dy = r * sj * s;
                    let dz = r * tj - ti;
                    Complex::new(consts.ball_unchecked(one_minus_r2, dx * dx + dy * dy + dz * dz), 0.0)
                })
                .collect();
            fwd.process(&mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o = b.re;
            }
        });

        let mut ball_ring_weights = Vec::with_capacity(shells * rb);
        for wr in ball.radial_weights() {
            for wa in &ang.ring_weights {
                ball_ring_weights.push(wr * wa);
            }
        }
        RingKernel { per_ring: n_phi, sphere_rings: rs, ball_rings: rb, shells, spectra, ball_ring_weights, fwd, inv }
    }

    fn transform_rings(&self, data: &[f64], weights: &[f64], fft: &Arc<dyn Fft<f64>>) -> Vec<Vec<Complex<f64>>> {
        data.chunks(self.per_ring)
            .zip(weights)
            .map(|(ring, w)| {
                let mut buf: Vec<Complex<f64>> = ring.iter().map(|x| Complex::new(w * x, 0.0)).collect();
                fft.process(&mut buf);
                buf
            })
            .collect()
    }

    fn extend(&self, v: &[f64], sphere: &SphereQuadrature) -> Vec<f64> {
        let np = self.per_ring;
        let vhat = self.transform_rings(v, &sphere.rings().ring_weights, &self.fwd);
        let scale = 1.0 / np as f64;
        let mut out = vec![0.0; self.shells * self.ball_rings * np];
        out.par_chunks_mut(np).enumerate().for_each(|(kj, dst)| {
            let mut acc = vec![Complex::new(0.0, 0.0); np];
            for (i, vh) in vhat.iter().enumerate() {
                let spec = &self.spectra[(kj * self.sphere_rings + i) * np..][..np];
                for ((a, s), x) in acc.iter_mut().zip(spec).zip(vh) {
                    *a += x * *s;
                }
            }
            self.inv.process(&mut acc);
            for (d, a) in dst.iter_mut().zip(&acc) {
                *d = a.re * scale;
            }
        });
        out
    }

    fn adjoint(&self, f: &[f64], _ball: &BallQuadrature) -> Vec<f64> {
        let np = self.per_ring;
        let fhat = self.transform_rings(f, &self.ball_ring_weights, &self.fwd);
        let scale = 1.0 / np as f64;
        let blocks = self.shells * self.ball_rings;
        let mut out = vec![0.0; self.sphere_rings * np];
        out.par_chunks_mut(np).enumerate().for_each(|(i, dst)| {
            let mut acc = vec![Complex::new(0.0, 0.0); np];
            for (kj, fh) in fhat.iter().enumerate().take(blocks) {
                let spec = &self.spectra[(kj * self.sphere_rings + i) * np..][..np];
                for ((a, s), x) in acc.iter_mut().zip(spec).zip(fh) {
                    *a += x * *s;
                }
            }
            self.inv.process(&mut acc);
            for (d, a) in dst.iter_mut().zip(&acc) {
                *d = a.re * scale;
            }
        });
        out
    }
}

/// `𝒫̃_a 1` at radius `r`, integrated adaptively over the sphere.
pub fn extension_of_constant(params: &ProblemParams, r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::domain(format!("radius must lie in [0, 1), got {r}")));
    }
    let consts = KernelConstants::new(params);
    let a = params.a();
    let pre = consts.ball_unchecked((1.0 - r) * (1.0 + r), 1.0);
    if r == 0.0 {
        return Ok(pre * params.sphere_area());
    }
    match params.n() {
        2 => {
            let w = 1.0 - r;
            let f = |t: f64| {
                let s = (0.5 * t).sin();
                (w * w + 4.0 * r * s * s).powf(-0.5 * (2.0 - a))
            };
            // the integrand peaks at t = 0 with width 1 - r; panels double away from it
            let mut total = 0.0;
            let mut lo = 0.0;
            let mut hi = w.min(PI);
            loop {
                let (v, _) = integrate_adaptive(&f, lo, hi, 0.0, 1e-13)?;
                total += v;
                if hi >= PI {
                    break;
                }
                lo = hi;
                hi = (2.0 * hi).min(PI);
            }
            Ok(pre * 2.0 * total)
        }
        3 => {
            let e = 1.0 - a;
            let bracket = ((1.0 - r).powf(-e) - (1.0 + r).powf(-e)) / (r * e);
            Ok(pre * 2.0 * PI * bracket)
        }
        n => Err(Error::InvalidParams(format!("only n = 2 and n = 3 are supported, got n = {n}"))),
    }
}

/// Boundary datum for [`extend_halfspace`].
#[derive(Clone, Copy)]
pub enum HalfspaceData<'a> {
    /// A constant, whose extension is the constant itself.
    Constant(f64),
    Function(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

/// Discretization of the half-space integral.
///
/// The integral is taken in polar coordinates about `x'`. Radial panels
/// grow geometrically away from `x'`, but no panel is wider than half its
/// distance to the data's bulk (assumed to sit within `data_scale` of the
/// origin) plus `data_scale / 2`; the azimuthal count grows on circles that
/// pass close to the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfspaceSettings {
    /// Minimum azimuthal nodes around `x'` (used for `n = 3`).
    pub angular_points: usize,
    /// Gauss–Legendre nodes per radial panel.
    pub points_per_panel: usize,
    /// Target for the truncation bound relative to the retained integral.
    pub tail_tol: f64,
    /// Length scale on which the data vary near the origin.
    pub data_scale: f64,
}

impl Default for HalfspaceSettings {
    fn default() -> Self {
        HalfspaceSettings { angular_points: 64, points_per_panel: 20, tail_tol: 1e-14, data_scale: 1.0 }
    }
}

/// Value of `𝒫_a u(x)` with the truncation radius and its tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfspaceValue {
    pub value: f64,
    pub truncation_radius: f64,
    pub tail_bound: f64,
}

/// `𝒫_a u(x) = ∫ P_a(y', x) u(y') dy'` over `|y' - x'| < R`, plus a bound
/// on the discarded tail `c x_n^{1-a} |S^{n-2}| U_R R^{a-1} / (1-a)`, where
/// `U_R` is the largest `|u|` sampled on `|y' - x'| = R`.
pub fn extend_halfspace(
    u: HalfspaceData<'_>,
    targets: &[HalfSpacePoint],
    params: &ProblemParams,
    settings: &HalfspaceSettings,
) -> Result<Vec<HalfspaceValue>> {
    let n = params.n();
    if n != 2 && n != 3 {
        return Err(Error::InvalidParams(format!("only n = 2 and n = 3 are supported, got n = {n}")));
    }
    for x in targets {
        if !(x.x_n > 0.0) {
            return Err(Error::domain(format!("extension needs x_n > 0, got x_n = {}", x.x_n)));
        }
        if x.dim() != n {
            return Err(Error::domain("target has the wrong dimension"));
        }
    }
    let f = match u {
        HalfspaceData::Constant(c) => {
            return Ok(targets
                .iter()
                .map(|_| HalfspaceValue { value: c, truncation_radius: f64::INFINITY, tail_bound: 0.0 })
                .collect())
        }
        HalfspaceData::Function(f) => f,
    };
    let consts = KernelConstants::new(params);
    let a = params.a();
    if !(settings.data_scale > 0.0) {
        return Err(Error::InvalidParams("data_scale must be positive".into()));
    }
    let scale = settings.data_scale;
    let directions = |m: usize| -> Vec<Vec<f64>> {
        if n == 2 {
            return vec![vec![1.0], vec![-1.0]];
        }
        (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    };
    let base = settings.angular_points.max(4);
    let (gx, gw) = gauss_legendre(settings.points_per_panel.max(2));
    // R^{a-1} ≤ tail_tol, capped so the panel count stays bounded
    let decades = (-settings.tail_tol.log10() / (1.0 - a)).min(30.0);
    let sphere_measure = unit_sphere_area(n - 1);

    targets
        .par_iter()
        .map(|x| {
            let xn = x.x_n;
            let radius = 10f64.powf(decades) * xn.max(1.0);
            let h0 = 0.5 * xn.min(1.0);
            let offset = norm_sq(&x.x_prime).sqrt();
            let mut terms = Vec::new();
            let mut lo = 0.0;
            let mut hi = h0;
            let mut y = vec![0.0; n - 1];
            loop {
                let top = hi.min(radius);
                let half = 0.5 * (top - lo);
                // circles nearest the origin need the finest azimuthal spacing
                let closest = offset.clamp(lo, top);
                let need = (8.0 * PI * closest / (scale + (closest - offset).abs())).ceil() as usize;
                let m = base.max(need.div_ceil(4) * 4).min(4096);
                let dirs = directions(m);
                let dir_weight = if n == 2 { 1.0 } else { 2.0 * PI / m as f64 };
                for (t, w) in gx.iter().zip(&gw) {
                    let r = lo + half * (t + 1.0);
                    let radial = consts.halfspace_unchecked(r * r, xn) * r.powi(n as i32 - 2) * w * half;
                    let mut ang = 0.0;
                    for d in &dirs {
                        for (yk, (xk, dk)) in y.iter_mut().zip(x.x_prime.iter().zip(d)) {
                            *yk = xk + r * dk;
                        }
                        ang += f(&y);
                    }
                    terms.push(radial * ang * dir_weight);
                }
                if top >= radius {
                    break;
                }
                lo = top;
                hi = top + top.min(0.5 * (scale + (top - offset).abs()));
            }
            let mut u_r: f64 = 0.0;
            for d in &directions(base) {
                for (yk, (xk, dk)) in y.iter_mut().zip(x.x_prime.iter().zip(d)) {
                    *yk = xk + radius * dk;
                }
                u_r = u_r.max(f(&y).abs());
            }
            let tail = consts.c_na * xn.powf(1.0 - a) * sphere_measure * u_r * radius.powf(a - 1.0) / (1.0 - a);
            let value = crate::quadrature::neumaier_sum(terms);
            if !value.is_finite() {
                return Err(Error::Integration("half-space extension is not finite".into()));
            }
            Ok(HalfspaceValue { value, truncation_radius: radius, tail_bound: tail })
        })
        .collect()
}

/// Result of [`conformal_pullback_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullbackCheck {
    pub max_rel_error: f64,
    /// `(𝒫̃_a v)(F(x))` at each sample point.
    pub ball_side: Vec<f64>,
    /// `(|x + e_n| / √2)^{n+a-2} 𝒫_a u(x)` at each sample point.
    pub halfspace_side: Vec<f64>,
    pub max_tail_bound: f64,
}

/// Compares both sides of
/// `(𝒫̃_a v)(F(x)) = (|x + e_n|/√2)^{n+a-2} 𝒫_a u(x)`, with
/// `u(y') = (√2/|y' + e_n|)^{n+a-2} v(F(y', 0))`.
///
/// `v` is a function on the sphere; the ball side samples it on `sphere`
/// and sums the kernel over the rule, the half-space side integrates `u`
/// with [`extend_halfspace`].
pub fn conformal_pullback_check(
    v: &(dyn Fn(&[f64]) -> f64 + Sync),
    sphere: &SphereQuadrature,
    sample_points: &[HalfSpacePoint],
    params: &ProblemParams,
    settings: &HalfspaceSettings,
) -> Result<PullbackCheck> {
    let values: Vec<f64> = sphere.nodes().iter().map(|x| v(x)).collect();
    let ball_pts: Vec<BallPoint> = sample_points.iter().map(mobius_f).collect();
    let ball_side = extend_at(&values, sphere, &ball_pts, params)?;
    let u = |y: &[f64]| -> f64 {
        let bnd = HalfSpacePoint { x_prime: y.to_vec(), x_n: 0.0 };
        conformal_weight(&bnd, params) * v(&stereographic(y).xi)
    };
    let hs = extend_halfspace(HalfspaceData::Function(&u), sample_points, params, settings)?;
    let mut halfspace_side = Vec::with_capacity(hs.len());
    let mut max_rel: f64 = 0.0;
    let mut max_tail: f64 = 0.0;
    for ((x, h), b) in sample_points.iter().zip(&hs).zip(&ball_side) {
        let w = conformal_weight(x, params);
        let rhs = h.value / w;
        max_rel = max_rel.max((b - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
        max_tail = max_tail.max(h.tail_bound / w);
        halfspace_side.push(rhs);
    }
    Ok(PullbackCheck { max_rel_error: max_rel, ball_side, halfspace_side, max_tail_bound: max_tail })
}

/// Central-difference approximation of `div(x_n^a ∇Φ)` at `x`. The normal
/// term is discretized in conservative form with `x_n^a` evaluated at the
/// half steps.
pub fn weighted_harmonic_residual(
    phi: &dyn Fn(&HalfSpacePoint) -> f64,
    x: &HalfSpacePoint,
    h: f64,
    params: &ProblemParams,
) -> Result<f64> {
    let a = params.a();
    if !(a > -1.0 && a < 1.0) {
        return Err(Error::InvalidParams(format!(
            "weighted harmonicity is stated for -1 < a < 1, got a = {a}"
        )));
    }
    if !(h > 0.0) || !(x.x_n > 2.0 * h) {
        return Err(Error::domain(format!(
            "stencil needs x_n > 2h, got x_n = {} and h = {h}",
            x.x_n
        )));
    }
    let center = phi(x);
    let mut tangential = 0.0;
    for k in 0..x.x_prime.len() {
        let mut plus = x.clone();
        plus.x_prime[k] += h;
        let mut minus = x.clone();
        minus.x_prime[k] -= h;
        tangential += phi(&plus) - 2.0 * center + phi(&minus);
    }
    let up = HalfSpacePoint { x_prime: x.x_prime.clone(), x_n: x.x_n + h };
    let down = HalfSpacePoint { x_prime: x.x_prime.clone(), x_n: x.x_n - h };
    let normal = (x.x_n + 0.5 * h).powf(a) * (phi(&up) - center)
        - (x.x_n - 0.5 * h).powf(a) * (center - phi(&down));
    Ok((x.x_n.powf(a) * tangential + normal) / (h * h))
}
