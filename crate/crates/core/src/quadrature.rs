//! Quadrature rules on the unit sphere and the unit ball, one-dimensional
//! Gauss rules, and the compensated sums used for every integral.
//!
//! Sphere rules are equispaced on the circle (`n = 2`) and a Gauss–Legendre
//! (in `cos θ`) by equispaced (in `φ`) product rule on `S^2` (`n = 3`). A
//! resolution `R` gives `R` nodes on the circle and `R/2` polar rings of `R`
//! nodes on `S^2`. Node sets are closed under `ξ ↦ -ξ` bit for bit.
//!
//! Ball rules are tensor products of a radial rule with a sphere rule. The
//! outermost shell sits at distance `δ_min` from the sphere; the accuracy of
//! the near-singular kernel sums in [`crate::operators`] is governed by
//! `δ_min` times the angular resolution.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{check_len, Error, Result};
use crate::geometry::ProblemParams;

/// Fixed-order Neumaier sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending. The rule
/// is made exactly symmetric: `x[m-1-i] = -x[i]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "Gauss–Legendre rule needs at least one node");
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th largest root, then Newton.
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[m - 1 - i] = z;
        x[i] = -z;
        w[m - 1 - i] = wi;
        w[i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

const GK_XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = h * GK_XK[j];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) integration on a finite interval.
/// Returns the value and an error estimate. The subdivision order is
/// deterministic.
pub fn integrate_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gk15(f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total = neumaier_sum(intervals.iter().map(|iv| iv.2));
        let err = neumaier_sum(intervals.iter().map(|iv| iv.3));
        if !total.is_finite() {
            return Err(Error::Integration("integrand produced a non-finite value".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Integration(format!(
                "error estimate {err:e} above tolerance after {MAX_INTERVALS} subintervals"
            )));
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, iv)| if iv.3 > be { (i, iv.3) } else { (bi, be) });
        let (lo, hi, _, _) = intervals[idx];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // the interval cannot be split further in double precision
            return Ok((total, err));
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        intervals[idx] = (lo, mid, v1, e1);
        intervals.insert(idx + 1, (mid, hi, v2, e2));
    }
}

/// Adaptive integration over `[a, ∞)` through `x = a + t/(1 - t)`.
pub fn integrate_to_infinity(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        f(a + t / s) / (s * s)
    };
    integrate_adaptive(&g, 0.0, 1.0, abs_tol, rel_tol)
}

/// Identifies the rule a sampled function lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereDescriptor {
    pub n: usize,
    pub resolution: usize,
}

/// Antipodally closed quadrature on `∂B_1`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    descriptor: SphereDescriptor,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    antipode_index: Vec<usize>,
    rings: RingLayout,
}

/// Ring structure of a sphere rule: `rings` polar rings (one for `n = 2`) of
/// `per_ring` equispaced azimuthal nodes. Node `(i, j)` has index
/// `i * per_ring + j` and azimuth `2πj/per_ring`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingLayout {
    /// Height `ξ_n` of each ring (empty for `n = 2`).
    pub heights: Vec<f64>,
    /// Weight of one node of each ring.
    pub ring_weights: Vec<f64>,
    pub per_ring: usize,
}

impl RingLayout {
    pub fn rings(&self) -> usize {
        self.ring_weights.len()
    }
}

impl SphereQuadrature {
    pub fn new(params: &ProblemParams, resolution: usize) -> Result<Self> {
        build_sphere_quadrature(params, resolution)
    }

    pub fn descriptor(&self) -> SphereDescriptor {
        self.descriptor
    }

    pub fn n(&self) -> usize {
        self.descriptor.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn antipode_index(&self) -> &[usize] {
        &self.antipode_index
    }

    pub fn rings(&self) -> &RingLayout {
        &self.rings
    }

    /// Largest angular gap between neighbouring nodes, a proxy for the node spacing.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.rings.per_ring as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_nodes_csv(&mut out, &self.nodes, "weight", &self.weights)
    }
}

/// Builds the sphere rule; see the module docs for the layout.
pub fn build_sphere_quadrature(params: &ProblemParams, resolution: usize) -> Result<SphereQuadrature> {
    let n = params.n();
    if n != 2 && n != 3 {
        return Err(Error::Quadrature(format!("only n = 2 and n = 3 are supported, got n = {n}")));
    }
    if resolution < 4 || resolution % 2 != 0 {
        return Err(Error::Quadrature(format!(
            "sphere resolution must be even and at least 4, got {resolution}"
        )));
    }
    let (cos_t, sin_t) = circle_table(resolution);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut antipode_index = Vec::new();
    let rings = if n == 2 {
        let w = 2.0 * PI / resolution as f64;
        for j in 0..resolution {
            nodes.push(vec![cos_t[j], sin_t[j]]);
            weights.push(w);
            antipode_index.push((j + resolution / 2) % resolution);
        }
        RingLayout { heights: Vec::new(), ring_weights: vec![w], per_ring: resolution }
    } else {
        let n_theta = resolution / 2;
        let (t, wt) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / resolution as f64;
        let mut ring_weights = Vec::with_capacity(n_theta);
        for i in 0..n_theta {
            let s = (1.0 - t[i] * t[i]).sqrt();
            let w = wt[i] * dphi;
            ring_weights.push(w);
            for j in 0..resolution {
                nodes.push(vec![s * cos_t[j], s * sin_t[j], t[i]]);
                weights.push(w);
                antipode_index.push((n_theta - 1 - i) * resolution + (j + resolution / 2) % resolution);
            }
        }
        RingLayout { heights: t, ring_weights, per_ring: resolution }
    };
    Ok(SphereQuadrature {
        descriptor: SphereDescriptor { n, resolution },
        nodes,
        weights,
        antipode_index,
        rings,
    })
}

/// `cos` and `sin` of `2πj/m` with `c[j + m/2] = -c[j]` exactly.
fn circle_table(m: usize) -> (Vec<f64>, Vec<f64>) {
    let half = m / 2;
    let mut c = vec![0.0; m];
    let mut s = vec![0.0; m];
    for j in 0..half {
        let th = 2.0 * PI * j as f64 / m as f64;
        c[j] = th.cos();
        s[j] = th.sin();
        c[j + half] = -c[j];
        s[j + half] = -s[j];
    }
    (c, s)
}

/// Radial rule of a ball quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialRule {
    /// Gauss–Legendre in `r` on `[0, 1]`.
    GaussLegendre { points: usize },
    /// Composite Gauss–Legendre on panels `[1 - ratio^k, 1 - ratio^{k+1}]`,
    /// the last panel closing at `r = 1`.
    Graded { panels: usize, points_per_panel: usize, ratio: f64 },
}

impl RadialRule {
    /// The fallback graded rule: ratio 0.5, six panels of eight points.
    pub fn graded_default() -> Self {
        RadialRule::Graded { panels: 6, points_per_panel: 8, ratio: 0.5 }
    }

    /// Nodes and weights on `[0, 1]` for the plain measure `dr`.
    pub fn nodes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match *self {
            RadialRule::GaussLegendre { points } => {
                if points < 2 {
                    return Err(Error::Quadrature(format!(
                        "radial rule needs at least 2 points, got {points}"
                    )));
                }
                Ok(map_rule(points, 0.0, 1.0))
            }
            RadialRule::Graded { panels, points_per_panel, ratio } => {
                if panels < 1 || points_per_panel < 2 || !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::Quadrature(format!(
                        "graded radial rule needs panels >= 1, points_per_panel >= 2 and 0 < ratio < 1, \
                         got {panels}, {points_per_panel}, {ratio}"
                    )));
                }
                let mut r = Vec::new();
                let mut w = Vec::new();
                let mut lo = 0.0;
                for k in 0..panels {
                    let hi = if k + 1 == panels { 1.0 } else { 1.0 - ratio.powi(k as i32 + 1) };
                    let (x, wx) = map_rule(points_per_panel, lo, hi);
                    r.extend(x);
                    w.extend(wx);
                    lo = hi;
                }
                Ok((r, w))
            }
        }
    }
}

fn map_rule(m: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let h = 0.5 * (hi - lo);
    (
        x.iter().map(|t| lo + h * (t + 1.0)).collect(),
        w.iter().map(|wi| h * wi).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallDescriptor {
    pub n: usize,
    pub angular_resolution: usize,
    pub radial: RadialRule,
}

/// Tensor-product quadrature on `B_1`. Node `k * S + m` sits on shell `k`
/// at direction `m` of the angular sphere rule with `S` nodes.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    descriptor: BallDescriptor,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    angular: SphereQuadrature,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    delta_min: f64,
}

impl BallQuadrature {
    pub fn new(params: &ProblemParams, radial: RadialRule, angular_resolution: usize) -> Result<Self> {
        let angular = build_sphere_quadrature(params, angular_resolution)?;
        let (radii, rw) = radial.nodes()?;
        let n = params.n();
        let mut nodes = Vec::with_capacity(radii.len() * angular.len());
        let mut weights = Vec::with_capacity(radii.len() * angular.len());
        let mut radial_weights = Vec::with_capacity(radii.len());
        for (r, w) in radii.iter().zip(&rw) {
            let wr = w * r.powi(n as i32 - 1);
            radial_weights.push(wr);
            for (dir, wa) in angular.nodes().iter().zip(angular.weights()) {
                nodes.push(dir.iter().map(|c| r * c).collect());
                weights.push(wr * wa);
            }
        }
        let r_max = radii.iter().cloned().fold(0.0, f64::max);
        Ok(BallQuadrature {
            descriptor: BallDescriptor { n, angular_resolution, radial },
            radii,
            radial_weights,
            angular,
            nodes,
            weights,
            delta_min: 1.0 - r_max,
        })
    }

    pub fn descriptor(&self) -> BallDescriptor {
        self.descriptor
    }

    pub fn n(&self) -> usize {
        self.descriptor.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Radial weights including the Jacobian `r^{n-1}`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn angular(&self) -> &SphereQuadrature {
        &self.angular
    }

    /// Distance from the outermost shell to the unit sphere.
    pub fn delta_min(&self) -> f64 {
        self.delta_min
    }

    /// Index of the node at `-ξ` for the node at `ξ`.
    pub fn antipode(&self, idx: usize) -> usize {
        let s = self.angular.len();
        (idx / s) * s + self.angular.antipode_index()[idx % s]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write_nodes_csv(&mut out, &self.nodes, "weight", &self.weights)
    }
}

/// Builds a ball rule with a Gauss–Legendre radial factor.
pub fn build_ball_quadrature(
    params: &ProblemParams,
    radial_points: usize,
    angular_resolution: usize,
) -> Result<BallQuadrature> {
    BallQuadrature::new(params, RadialRule::GaussLegendre { points: radial_points }, angular_resolution)
}

pub fn integrate_boundary(values: &[f64], quad: &SphereQuadrature) -> Result<f64> {
    check_len(quad.len(), values.len())?;
    Ok(neumaier_sum(values.iter().zip(quad.weights()).map(|(v, w)| v * w)))
}

pub fn integrate_ball(values: &[f64], quad: &BallQuadrature) -> Result<f64> {
    check_len(quad.len(), values.len())?;
    Ok(neumaier_sum(values.iter().zip(quad.weights()).map(|(v, w)| v * w)))
}

pub(crate) fn write_nodes_csv<W: Write>(
    out: &mut W,
    nodes: &[Vec<f64>],
    value_name: &str,
    values: &[f64],
) -> std::io::Result<()> {
    let dim = nodes.first().map_or(0, |n| n.len());
    let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
    writeln!(out, "{},{}", header.join(","), value_name)?;
    for (node, v) in nodes.iter().zip(values) {
        for c in node {
            write!(out, "{c},")?;
        }
        writeln!(out, "{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(n: usize, a: f64) -> ProblemParams {
        ProblemParams::new(n, a).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in 1..30 {
            let (x, w) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let num = neumaier_sum(x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)));
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((num - exact).abs() < 1e-13, "m={m} deg={deg}");
            }
            for i in 0..m {
                assert_eq!(x[m - 1 - i], -x[i]);
            }
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let (v, _) = integrate_adaptive(&|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let (v, _) = integrate_to_infinity(&|x: f64| 1.0 / (1.0 + x * x), 0.0, 1e-13, 1e-13).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn sphere_rule_n2() {
        let q = build_sphere_quadrature(&p(2, 0.5), 8).unwrap();
        assert_eq!(q.len(), 8);
        assert!(q.weights().iter().all(|w| *w == 2.0 * PI / 8.0));
        let ones = vec![1.0; 8];
        assert!((integrate_boundary(&ones, &q).unwrap() - 2.0 * PI).abs() < 1e-12);
        let x: Vec<f64> = q.nodes().iter().map(|n| n[0]).collect();
        assert!(integrate_boundary(&x, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sphere_rule_n3() {
        let q = build_sphere_quadrature(&p(3, 0.0), 16).unwrap();
        assert_eq!(q.len(), 8 * 16);
        let ones = vec![1.0; q.len()];
        assert!((integrate_boundary(&ones, &q).unwrap() - 4.0 * PI).abs() < 1e-12);
        let x: Vec<f64> = q.nodes().iter().map(|n| n[0]).collect();
        assert!(integrate_boundary(&x, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sphere_rule_rejects_bad_resolution() {
        assert!(build_sphere_quadrature(&p(2, 0.5), 7).is_err());
        assert!(build_sphere_quadrature(&p(3, 0.0), 2).is_err());
        assert!(build_sphere_quadrature(&p(4, 0.0), 8).is_err());
    }

    // Monomials x^i y^j z^k on S^2 integrate to a product of Gamma values.
    fn sphere_monomial(i: u32, j: u32, k: u32) -> f64 {
        if i % 2 == 1 || j % 2 == 1 || k % 2 == 1 {
            return 0.0;
        }
        use statrs::function::gamma::gamma;
        let b = |e: u32| (e as f64 + 1.0) / 2.0;
        2.0 * gamma(b(i)) * gamma(b(j)) * gamma(b(k)) / gamma(b(i) + b(j) + b(k))
    }

    #[test]
    fn sphere_rule_exact_on_harmonics() {
        let res = 12;
        let q = build_sphere_quadrature(&p(3, 0.0), res).unwrap();
        let max_deg = (res / 2) as u32;
        for i in 0..=max_deg {
            for j in 0..=(max_deg - i) {
                for k in 0..=(max_deg - i - j) {
                    let vals: Vec<f64> = q
                        .nodes()
                        .iter()
                        .map(|n| n[0].powi(i as i32) * n[1].powi(j as i32) * n[2].powi(k as i32))
                        .collect();
                    let num = integrate_boundary(&vals, &q).unwrap();
                    assert!((num - sphere_monomial(i, j, k)).abs() < 1e-10, "{i} {j} {k}");
                }
            }
        }
        let q2 = build_sphere_quadrature(&p(2, 0.5), res).unwrap();
        for m in 1..=(res / 2) {
            let vals: Vec<f64> = q2.nodes().iter().map(|n| (m as f64 * n[1].atan2(n[0])).cos()).collect();
            assert!(integrate_boundary(&vals, &q2).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn antipodes_exact() {
        for (n, res) in [(2, 10), (3, 10), (3, 12)] {
            let q = build_sphere_quadrature(&p(n, 0.5), res).unwrap();
            for i in 0..q.len() {
                let j = q.antipode_index()[i];
                assert_eq!(q.antipode_index()[j], i);
                assert_eq!(q.weights()[i], q.weights()[j]);
                for (a, b) in q.nodes()[i].iter().zip(&q.nodes()[j]) {
                    assert_eq!(*a, -*b);
                }
            }
        }
    }

    #[test]
    fn ball_rule_volume_and_symmetry() {
        for (n, vol) in [(2, PI), (3, 4.0 * PI / 3.0)] {
            let q = build_ball_quadrature(&p(n, 0.5), 8, 12).unwrap();
            let ones = vec![1.0; q.len()];
            assert!((integrate_ball(&ones, &q).unwrap() - vol).abs() < 1e-8);
            let x: Vec<f64> = q.nodes().iter().map(|x| x[0]).collect();
            assert!(integrate_ball(&x, &q).unwrap().abs() < 1e-10);
            assert!(q.delta_min() > 0.0);
            assert!(q.nodes().iter().all(|x| x.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1.0 - q.delta_min() + 1e-15));
            for i in 0..q.len() {
                let j = q.antipode(i);
                for (a, b) in q.nodes()[i].iter().zip(&q.nodes()[j]) {
                    assert_eq!(*a, -*b);
                }
            }
        }
        let graded = BallQuadrature::new(&p(3, 0.0), RadialRule::graded_default(), 8).unwrap();
        let ones = vec![1.0; graded.len()];
        assert!((integrate_ball(&ones, &graded).unwrap() - 4.0 * PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn length_mismatch() {
        let q = build_sphere_quadrature(&p(2, 0.5), 8).unwrap();
        assert!(matches!(integrate_boundary(&[1.0; 7], &q), Err(Error::LengthMismatch { expected: 8, got: 7 })));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let q = build_sphere_quadrature(&p(2, 0.5), 8).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("x0,x1,weight"));
    }

    proptest! {
        #[test]
        fn neumaier_matches_exact_cancellation(x in 1e10..1e16f64, y in -1.0..1.0f64) {
            let s = neumaier_sum([x, y, -x]);
            prop_assert_eq!(s, y);
        }
    }
}
