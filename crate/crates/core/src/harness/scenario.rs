//! Scenario configuration: the serializable description of one Monte Carlo
//! experiment, its validation, and the two built-in benchmarks.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix, Vector};
use crate::models::{falling_body_model, helicopter_model, JacobianMode, NoiseSpec, ParametricModel};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_NME_THRESHOLD: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    FallingBody,
    Helicopter,
}

impl ModelId {
    pub fn build(self) -> Arc<dyn ParametricModel> {
        match self {
            ModelId::FallingBody => Arc::new(falling_body_model()),
            ModelId::Helicopter => Arc::new(helicopter_model()),
        }
    }
}

/// The three filters compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    /// CKF given the true parameters.
    PerfectCkf,
    /// CKF given only the reference parameters.
    ImperfectCkf,
    /// Desensitized CKF given the reference parameters.
    Dckf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::PerfectCkf, FilterKind::ImperfectCkf, FilterKind::Dckf];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::PerfectCkf => "perfect-ckf",
            FilterKind::ImperfectCkf => "imperfect-ckf",
            FilterKind::Dckf => "dckf",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A configuration problem, tied to the offending key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

fn default_nme_threshold() -> f64 {
    DEFAULT_NME_THRESHOLD
}

/// Serializable experiment description. Matrices are stored as lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub spec_version: u32,
    pub name: String,
    pub model: ModelId,
    /// Simulated time span, seconds.
    pub duration: f64,
    /// Sample interval, seconds.
    pub dt: f64,
    pub mc_runs: usize,
    pub seed: u64,
    /// Uniform `[low, high]` bounds for each true parameter.
    pub param_bounds: Vec<[f64; 2]>,
    pub c_ref: Vec<f64>,
    pub x0_true: Vec<f64>,
    pub x0_hat: Vec<f64>,
    pub p0: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// One `n × n` sensitivity weight per parameter.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub filters: Vec<FilterKind>,
    /// Diagonal jitter added to `Q` inside the filters (not the truth).
    #[serde(default)]
    pub process_jitter: f64,
    #[serde(default = "default_nme_threshold")]
    pub nme_threshold: f64,
    #[serde(default)]
    pub jacobian_mode: JacobianMode,
}

fn diag(values: &[f64]) -> Vec<Vec<f64>> {
    (0..values.len())
        .map(|i| (0..values.len()).map(|j| if i == j { values[i] } else { 0.0 }).collect())
        .collect()
}

fn rows_to_matrix(key: &str, rows: &[Vec<f64>], n: usize, m: usize) -> Result<Matrix, ConfigError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != m) {
        return Err(ConfigError::new(key, format!("expected a {n}x{m} matrix")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(key, "entries must be finite"));
    }
    Ok(Matrix::from_row_slice(n, m, &flat))
}

fn to_vector(key: &str, values: &[f64], n: usize) -> Result<Vector, ConfigError> {
    if values.len() != n {
        return Err(ConfigError::new(key, format!("expected {n} entries, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(key, "entries must be finite"));
    }
    Ok(Vector::from_row_slice(values))
}

/// A validated scenario with all matrices materialized.
#[derive(Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: Arc<dyn ParametricModel>,
    pub steps: usize,
    pub c_ref: Vector,
    pub x0_true: Vector,
    pub x0_hat: Vector,
    pub p0: Matrix,
    pub noise: NoiseSpec,
    pub weights: Vec<Matrix>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario").field("config", &self.config).field("steps", &self.steps).finish_non_exhaustive()
    }
}

impl ScenarioConfig {
    /// Number of filter steps, `duration / dt`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.resolve().map(|_| ())
    }

    /// Validates every field and builds the runtime [`Scenario`].
    pub fn resolve(&self) -> Result<Scenario, ConfigError> {
        if self.spec_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "spec_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.spec_version),
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::new("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ConfigError::new("duration", format!("must be positive, got {}", self.duration)));
        }
        let ratio = self.duration / self.dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(ConfigError::new("dt", format!("must divide duration {} evenly", self.duration)));
        }
        if self.mc_runs < 1 {
            return Err(ConfigError::new("mc_runs", "must be at least 1"));
        }
        if self.filters.is_empty() {
            return Err(ConfigError::new("filters", "at least one filter is required"));
        }
        if !(self.nme_threshold > 0.0 && self.nme_threshold.is_finite()) {
            return Err(ConfigError::new("nme_threshold", "must be positive"));
        }
        if !(self.process_jitter >= 0.0 && self.process_jitter.is_finite()) {
            return Err(ConfigError::new("process_jitter", "must be non-negative"));
        }

        let model = self.model.build();
        let (n, m, l) = (model.state_dim(), model.meas_dim(), model.param_dim());
        if self.param_bounds.len() != l {
            return Err(ConfigError::new("param_bounds", format!("expected {l} bounds")));
        }
        for [lo, hi] in &self.param_bounds {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(ConfigError::new("param_bounds", format!("need low <= high, got [{lo}, {hi}]")));
            }
        }
        let c_ref = to_vector("c_ref", &self.c_ref, l)?;
        let x0_true = to_vector("x0_true", &self.x0_true, n)?;
        let x0_hat = to_vector("x0_hat", &self.x0_hat, n)?;
        let p0 = rows_to_matrix("p0", &self.p0, n, n)?;
        linalg::cholesky(&p0).map_err(|e| ConfigError::new("p0", e.to_string()))?;
        let q = rows_to_matrix("q", &self.q, n, n)?;
        let r = rows_to_matrix("r", &self.r, m, m)?;
        linalg::cholesky(&r).map_err(|e| ConfigError::new("r", e.to_string()))?;
        let noise = NoiseSpec::new(q, r).map_err(|e| ConfigError::new("q", e.to_string()))?;
        if self.weights.len() != l {
            return Err(ConfigError::new("weights", format!("expected {l} weight matrices")));
        }
        let weights = self
            .weights
            .iter()
            .map(|w| rows_to_matrix("weights", w, n, n))
            .collect::<Result<Vec<_>, _>>()?;
        for w in &weights {
            if !linalg::is_symmetric(w) || w.clone().symmetric_eigenvalues().min() < -1e-12 * w.norm().max(1.0) {
                return Err(ConfigError::new("weights", "must be symmetric positive semi-definite"));
            }
        }

        Ok(Scenario {
            config: self.clone(),
            model,
            steps: self.steps(),
            c_ref,
            x0_true,
            x0_hat,
            p0,
            noise,
            weights,
        })
    }

    /// Falling body tracked by radar: 60 s at 10 Hz, one uncertain parameter.
    pub fn falling_body() -> Self {
        let c_ref = 2.0e4;
        Self {
            spec_version: SCHEMA_VERSION,
            name: "falling-body".into(),
            model: ModelId::FallingBody,
            duration: 60.0,
            dt: 0.1,
            mc_runs: 200,
            seed: 1,
            param_bounds: vec![[0.75 * c_ref, 1.25 * c_ref]],
            c_ref: vec![c_ref],
            x0_true: vec![3.0e5, -2.0e4, 1.0e-3],
            x0_hat: vec![3.0e5, -2.0e4, 3.0e-5],
            p0: diag(&[1.0e6, 4.0e6, 1.0e-4]),
            q: diag(&[0.0, 0.0, 0.0]),
            r: vec![vec![1.0e4]],
            weights: vec![diag(&[3.0e4, 6.0e3, 1.0e5])],
            filters: FilterKind::ALL.to_vec(),
            process_jitter: 0.0,
            nme_threshold: DEFAULT_NME_THRESHOLD,
            jacobian_mode: JacobianMode::Analytic,
        }
    }

    /// Hovering helicopter: 4 s at 20 Hz, two uncertain parameters.
    ///
    /// The second parameter's range `U(0.05, 0.15)` is an assumption,
    /// ±50 % of its reference value like the first. `R = 0.01·I` and `Q = 0`
    /// are defaults as well.
    pub fn helicopter() -> Self {
        let x0 = vec![0.7929, -0.0466, -0.1871, 0.5780];
        let w = diag(&[3.0e-3, 2.0e-3, 1.0e-2, 2.0e-2]);
        Self {
            spec_version: SCHEMA_VERSION,
            name: "helicopter".into(),
            model: ModelId::Helicopter,
            duration: 4.0,
            dt: 0.05,
            mc_runs: 200,
            seed: 1,
            param_bounds: vec![[-0.15, -0.05], [0.05, 0.15]],
            c_ref: vec![-0.1, 0.1],
            x0_true: x0.clone(),
            x0_hat: x0,
            p0: diag(&[1.0; 4]),
            q: diag(&[0.0; 4]),
            r: diag(&[1.0e-2; 4]),
            weights: vec![w.clone(), w],
            filters: FilterKind::ALL.to_vec(),
            process_jitter: 0.0,
            nme_threshold: DEFAULT_NME_THRESHOLD,
            jacobian_mode: JacobianMode::Analytic,
        }
    }
}

/// The built-in scenarios, by name.
pub fn builtin_scenarios() -> Vec<(&'static str, ScenarioConfig)> {
    vec![("falling-body", ScenarioConfig::falling_body()), ("helicopter", ScenarioConfig::helicopter())]
}
