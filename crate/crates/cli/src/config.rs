//! Run configuration: JSON with a strict schema.

use std::path::{Path, PathBuf};

use confext::functionals::{SharpMethod, WeightFunction};
use confext::quadrature::{RadialRule, SphereQuadrature};
use confext::solver::SolverSettings;
use confext::ProblemParams;
use serde::{Deserialize, Serialize};

/// A configuration that failed to load or validate.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ProblemParams,
    #[serde(default)]
    pub k_spec: KSpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub sharp: SharpConfig,
    /// Repeat runs at half resolution to attach error estimates.
    #[serde(default = "yes")]
    pub error_estimates: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("confext-out")
}

/// The weight `K` as a truncated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KSpec {
    Constant { c: f64 },
    /// `K(θ) = Σ_k coefficients[k] cos(kθ)` on the circle (`n = 2`).
    CosineSeries { coefficients: Vec<f64> },
    /// `K(η) = Σ_l coefficients[l] P_l(η_n)` on the 2-sphere (`n = 3`).
    ZonalSeries { coefficients: Vec<f64> },
}

impl Default for KSpec {
    fn default() -> Self {
        KSpec::Constant { c: 1.0 }
    }
}

/// Positivity of `K` on the check grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KCheck {
    pub min: f64,
    pub max: f64,
    /// Equal to `min`; the distance of `K` from zero on the grid.
    pub positivity_margin: f64,
    pub grid_points: usize,
}

const K_GRID: usize = 8192;

impl KSpec {
    /// Rejects odd terms, series of the wrong kind for `n`, and weights that
    /// are not positive on a fine grid.
    pub fn validate(&self, params: &ProblemParams) -> Result<KCheck, ConfigError> {
        let (coeffs, expect_n, word) = match self {
            KSpec::Constant { c } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(ConfigError(format!("k_spec: K must be positive, got constant {c}")));
                }
                return Ok(KCheck { min: *c, max: *c, positivity_margin: *c, grid_points: 1 });
            }
            KSpec::CosineSeries { coefficients } => (coefficients, 2, "frequency"),
            KSpec::ZonalSeries { coefficients } => (coefficients, 3, "degree"),
        };
        if params.n() != expect_n {
            return Err(ConfigError(format!(
                "k_spec: this series kind needs n = {expect_n}, got n = {}",
                params.n()
            )));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(ConfigError("k_spec: coefficients must be finite and non-empty".into()));
        }
        if let Some((k, c)) = coeffs.iter().enumerate().find(|(k, c)| k % 2 == 1 && **c != 0.0) {
            return Err(ConfigError(format!(
                "k_spec: antipodality violated: odd {word} {k} has coefficient {c}"
            )));
        }
        // K depends on one variable t = cos θ (circle) or η_n (sphere) in [-1, 1]
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=K_GRID {
            let t = -1.0 + 2.0 * i as f64 / K_GRID as f64;
            let k = series(coeffs, t, expect_n);
            min = min.min(k);
            max = max.max(k);
        }
        if !(min > 0.0) {
            return Err(ConfigError(format!("k_spec: K must be positive, minimum on the check grid is {min}")));
        }
        Ok(KCheck { min, max, positivity_margin: min, grid_points: K_GRID + 1 })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            KSpec::Constant { c } => *c,
            // cos(kθ) = T_k(cos θ) with cos θ = x_0
            KSpec::CosineSeries { coefficients } => series(coefficients, x[0], 2),
            KSpec::ZonalSeries { coefficients } => series(coefficients, x[x.len() - 1], 3),
        }
    }

    pub fn weight(&self, quad: &SphereQuadrature) -> confext::Result<WeightFunction> {
        WeightFunction::from_fn(quad, |x| self.eval(x), true)
    }
}

/// `Σ c_k T_k(t)` for `n = 2`, `Σ c_k P_k(t)` for `n = 3`, by the three-term recurrences.
fn series(coeffs: &[f64], t: f64, n: usize) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    let mut sum = coeffs[0];
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        if k > 1 {
            let kf = k as f64;
            let next = if n == 2 {
                2.0 * t * cur - prev
            } else {
                ((2.0 * kf - 1.0) * t * cur - (kf - 1.0) * prev) / kf
            };
            prev = cur;
            cur = next;
        }
        sum += c * cur;
    }
    sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Sphere resolution; for `n = 3` the azimuthal count, with half as many rings.
    pub sphere_resolution: usize,
    pub radial: RadialRule,
    /// Precompute the dense kernel matrix (only used when the ring backend does not apply).
    pub cache_kernel: bool,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { sphere_resolution: 128, radial: RadialRule::GaussLegendre { points: 3 }, cache_kernel: false }
    }
}

impl QuadratureConfig {
    /// Multiplies the sphere resolution by `scale` and refines the radial
    /// rule so that the resolution times the gap to the sphere stays fixed.
    pub fn scaled(&self, scale: u32) -> Self {
        let s = scale as f64;
        let radial = match self.radial {
            RadialRule::GaussLegendre { points } => {
                RadialRule::GaussLegendre { points: (points as f64 * s.sqrt()).round() as usize }
            }
            RadialRule::Graded { panels, points_per_panel, ratio } => {
                let extra = (s.ln() / (1.0 / ratio).ln()).round() as usize;
                RadialRule::Graded { panels: panels + extra, points_per_panel, ratio }
            }
        };
        QuadratureConfig { sphere_resolution: self.sphere_resolution * scale as usize, radial, ..*self }
    }

    /// The rule at half resolution, for error estimates.
    pub fn halved(&self) -> Self {
        let radial = match self.radial {
            RadialRule::GaussLegendre { points } => {
                RadialRule::GaussLegendre { points: ((points as f64 / 2f64.sqrt()).round() as usize).max(2) }
            }
            RadialRule::Graded { panels, points_per_panel, ratio } => {
                let fewer = (2f64.ln() / (1.0 / ratio).ln()).round() as usize;
                RadialRule::Graded { panels: panels.saturating_sub(fewer).max(1), points_per_panel, ratio }
            }
        };
        QuadratureConfig { sphere_resolution: (self.sphere_resolution / 2).max(4) & !1, radial, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Exponent; defaults to the midpoint of `[p_crit, p_bulk)`.
    pub p: Option<f64>,
    /// Number of starts: the constant plus seeded random ones.
    pub starts: usize,
    /// Log-standard deviation of random starts.
    pub sigma: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { p: None, starts: 1, sigma: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    /// First exponent of the default geometric schedule; the midpoint of
    /// `[p_crit, p_bulk)` when absent.
    pub p_start: Option<f64>,
    pub stages: usize,
    pub epsilon_floor: f64,
    pub blow_up_factor: f64,
    /// Explicit decreasing schedule, overriding the geometric one.
    pub schedule: Option<Vec<f64>>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig { p_start: None, stages: 6, epsilon_floor: 1e-3, blow_up_factor: 2.0, schedule: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpConfig {
    /// Methods to run; all applicable ones when absent.
    pub methods: Option<Vec<SharpMethod>>,
    /// Starts of the numerical maximization.
    pub starts: usize,
}

impl Default for SharpConfig {
    fn default() -> Self {
        SharpConfig { methods: None, starts: 2 }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError(format!("config error at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<KCheck, ConfigError> {
        let n = self.params.n();
        if n != 2 && n != 3 {
            return Err(ConfigError(format!("params.n: only n = 2 and n = 3 are supported, got {n}")));
        }
        let q = &self.quadrature;
        if q.sphere_resolution < 8 || q.sphere_resolution % 2 == 1 {
            return Err(ConfigError(format!(
                "quadrature.sphere_resolution must be even and at least 8, got {}",
                q.sphere_resolution
            )));
        }
        if self.solve.starts == 0 || self.sharp.starts == 0 {
            return Err(ConfigError("solve.starts and sharp.starts must be at least 1".into()));
        }
        if self.continuation.stages == 0 {
            return Err(ConfigError("continuation.stages must be at least 1".into()));
        }
        self.k_spec.validate(&self.params)
    }

    /// Applies the command-line overrides.
    pub fn with_overrides(mut self, out: Option<PathBuf>, resolution_scale: u32, seed: Option<u64>) -> Self {
        if let Some(out) = out {
            self.output_dir = out;
        }
        if let Some(seed) = seed {
            self.seed = seed;
        }
        self.quadrature = self.quadrature.scaled(resolution_scale);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"params": {"n": 3, "a": 0.0}}"#;

    #[test]
    fn defaults_and_echo_round_trip() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.k_spec, KSpec::Constant { c: 1.0 });
        assert_eq!(cfg.quadrature.sphere_resolution, 128);
        let echoed = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&echoed).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = RunConfig::from_json(r#"{"params": {"n": 3, "a": 0.0}, "solver": {"tol": 1e-9}}"#).unwrap_err();
        assert!(err.0.contains("solver"), "{err}");
        assert!(err.0.contains("line 1"), "{err}");
    }

    #[test]
    fn parameter_range_is_enforced() {
        let err = RunConfig::from_json(r#"{"params": {"n": 3, "a": 1.5}}"#).unwrap_err();
        assert!(err.0.contains("a must lie in (2−n, 1)"), "{err}");
        let err = RunConfig::from_json(r#"{"params": {"n": 4, "a": 0.0}}"#).unwrap_err();
        assert!(err.0.contains("only n = 2 and n = 3"), "{err}");
    }

    #[test]
    fn odd_terms_violate_antipodality() {
        let cfg = r#"{"params": {"n": 2, "a": 0.5}, "k_spec": {"kind": "cosine_series", "coefficients": [1.0, 0.1]}}"#;
        assert!(RunConfig::from_json(cfg).unwrap_err().0.contains("antipodality violated"));
        let cfg = r#"{"params": {"n": 3, "a": 0.0}, "k_spec": {"kind": "zonal_series", "coefficients": [1.0, 0.0, 0.2, 0.05]}}"#;
        assert!(RunConfig::from_json(cfg).unwrap_err().0.contains("antipodality violated"));
        let ok = r#"{"params": {"n": 2, "a": 0.5}, "k_spec": {"kind": "cosine_series", "coefficients": [1.0, 0.0, 0.1]}}"#;
        assert!(RunConfig::from_json(ok).is_ok());
    }

    #[test]
    fn positivity_and_kind_checks() {
        let neg = r#"{"params": {"n": 2, "a": 0.5}, "k_spec": {"kind": "cosine_series", "coefficients": [0.5, 0.0, 0.6]}}"#;
        assert!(RunConfig::from_json(neg).unwrap_err().0.contains("positive"));
        let wrong = r#"{"params": {"n": 3, "a": 0.0}, "k_spec": {"kind": "cosine_series", "coefficients": [1.0]}}"#;
        assert!(RunConfig::from_json(wrong).unwrap_err().0.contains("n = 2"));
        let check = KSpec::CosineSeries { coefficients: vec![1.0, 0.0, 0.1] }
            .validate(&ProblemParams::new(2, 0.5).unwrap())
            .unwrap();
        assert!((check.min - 0.9).abs() < 1e-12 && (check.max - 1.1).abs() < 1e-12);
    }

    #[test]
    fn series_matches_trigonometric_and_legendre_forms() {
        for t in [0.0, 0.4, 1.3, 2.9] {
            let x = [f64::cos(t), f64::sin(t)];
            let k = KSpec::CosineSeries { coefficients: vec![1.0, 0.0, 0.1, 0.0, -0.05] }.eval(&x);
            assert!((k - (1.0 + 0.1 * (2.0 * t).cos() - 0.05 * (4.0 * t).cos())).abs() < 1e-14);
            let z = t.cos();
            let k = KSpec::ZonalSeries { coefficients: vec![1.0, 0.0, 0.3] }.eval(&[0.0, t.sin(), z]);
            assert!((k - (1.0 + 0.3 * 0.5 * (3.0 * z * z - 1.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn scaling_keeps_resolution_times_gap_fixed() {
        let q = QuadratureConfig { sphere_resolution: 2048, radial: RadialRule::GaussLegendre { points: 12 }, cache_kernel: false };
        let s = q.scaled(2);
        assert_eq!(s.sphere_resolution, 4096);
        assert_eq!(s.radial, RadialRule::GaussLegendre { points: 17 });
        assert_eq!(s.halved().radial, RadialRule::GaussLegendre { points: 12 });
        assert_eq!(q.scaled(1), q);
    }
}
