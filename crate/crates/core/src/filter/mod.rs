//! Cubature Kalman filter (CKF) and its desensitized variant (DCKF).
//!
//! Both filters share the same cubature machinery. The desensitized filter
//! additionally carries, for every uncertain parameter `cᵢ`, the sensitivity
//! of the estimate `sᵢ = ∂x̂/∂cᵢ` and of the covariance `∂P/∂cᵢ`, and picks
//! the gain that minimizes
//!
//! ```text
//! J_d = Tr(P⁺) + Σᵢ sᵢ⁺ᵀ·Wᵢ·sᵢ⁺
//! ```
//!
//! instead of `Tr(P⁺)` alone. The gain is treated as independent of the
//! parameters when differentiating the update.
//!
//! A plain CKF can still track sensitivities (`track_sensitivities`), which
//! is how the imperfect-filter baseline is instrumented; the tracked values
//! never feed back into its estimate.

mod cubature;
mod update;

pub use cubature::{
    cross_covariance, cross_covariance_derivative, cubature_directions, generate_cubature_points,
    generate_point_sensitivities, mean, CubatureSet,
};
pub use update::{
    apply_gain, compute_gain, dckf_step, measurement_intermediates, measurement_update, step_with_gain, time_update,
    MeasurementUpdateIntermediates, Prior,
};

use std::sync::Arc;

use crate::linalg::{LinalgError, Matrix, Vector};
use crate::models::{JacobianMode, ModelError, NoiseSpec, ParametricModel};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMode {
    /// Gain minimizes `Tr(P⁺)`.
    Ckf,
    /// Gain minimizes the sensitivity-penalized cost.
    Dckf,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("step {step}: {stage} covariance is not positive definite: {source}")]
    NotPositiveDefinite {
        step: usize,
        stage: &'static str,
        #[source]
        source: LinalgError,
    },
    #[error("step {step}: gain equation could not be solved: {source}")]
    SingularSystem {
        step: usize,
        #[source]
        source: LinalgError,
    },
    #[error("step {step}: {source}")]
    Model {
        step: usize,
        #[source]
        source: ModelError,
    },
    #[error("invalid filter configuration: {0}")]
    Config(String),
}

impl FilterError {
    pub fn step(&self) -> Option<usize> {
        match self {
            Self::NotPositiveDefinite { step, .. } | Self::SingularSystem { step, .. } | Self::Model { step, .. } => {
                Some(*step)
            }
            Self::Config(_) => None,
        }
    }
}

/// Everything the filter recursion needs besides its state.
#[derive(Clone)]
pub struct FilterConfig {
    pub model: Arc<dyn ParametricModel>,
    pub noise: NoiseSpec,
    /// Parameter values the filter believes (`c̄` for imperfect filters).
    pub c_ref: Vector,
    /// One `n × n` weight per parameter; ignored for the gain in CKF mode.
    pub weights: Vec<Matrix>,
    pub mode: FilterMode,
    pub jacobian_mode: JacobianMode,
    pub track_sensitivities: bool,
    /// Diagonal added to `Q` at every time update.
    pub process_jitter: f64,
}

impl std::fmt::Debug for FilterConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterConfig")
            .field("state_dim", &self.model.state_dim())
            .field("c_ref", &self.c_ref)
            .field("mode", &self.mode)
            .field("jacobian_mode", &self.jacobian_mode)
            .field("track_sensitivities", &self.track_sensitivities)
            .field("process_jitter", &self.process_jitter)
            .finish_non_exhaustive()
    }
}

impl FilterConfig {
    pub fn new(
        model: Arc<dyn ParametricModel>,
        noise: NoiseSpec,
        c_ref: Vector,
        weights: Vec<Matrix>,
        mode: FilterMode,
    ) -> Result<Self, FilterError> {
        let (n, m, l) = (model.state_dim(), model.meas_dim(), model.param_dim());
        if noise.q.shape() != (n, n) || noise.r.shape() != (m, m) {
            return Err(FilterError::Config(format!(
                "noise shapes Q {:?}, R {:?} do not match n = {n}, m = {m}",
                noise.q.shape(),
                noise.r.shape()
            )));
        }
        if c_ref.len() != l {
            return Err(FilterError::Config(format!("expected {l} parameters, got {}", c_ref.len())));
        }
        if weights.len() != l || weights.iter().any(|w| w.shape() != (n, n)) {
            return Err(FilterError::Config(format!("expected {l} weight matrices of size {n}x{n}")));
        }
        if weights.iter().any(|w| !crate::linalg::is_symmetric(w)) {
            return Err(FilterError::Config("weight matrices must be symmetric".into()));
        }
        Ok(Self {
            model,
            noise,
            c_ref,
            weights,
            mode,
            jacobian_mode: JacobianMode::Analytic,
            track_sensitivities: mode == FilterMode::Dckf,
            process_jitter: 0.0,
        })
    }

    pub fn with_jacobian_mode(mut self, mode: JacobianMode) -> Self {
        self.jacobian_mode = mode;
        self
    }

    /// Sensitivities are always tracked in DCKF mode; this only matters for CKF.
    pub fn with_sensitivity_tracking(mut self, track: bool) -> Self {
        self.track_sensitivities = track || self.mode == FilterMode::Dckf;
        self
    }

    pub fn with_process_jitter(mut self, jitter: f64) -> Self {
        self.process_jitter = jitter;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    pub(crate) fn tracks_sensitivities(&self) -> bool {
        self.track_sensitivities || self.mode == FilterMode::Dckf
    }

    /// Weights that enter the gain: zero-length in CKF mode.
    pub(crate) fn gain_weights(&self) -> &[Matrix] {
        match self.mode {
            FilterMode::Ckf => &[],
            FilterMode::Dckf => &self.weights,
        }
    }
}

/// Quantities recorded at the end of each measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub gain: Matrix,
    pub innovation: Vector,
    /// Cost the gain minimized: `Tr(P⁺)` for CKF, `J_d` for DCKF.
    pub cost: f64,
}

/// A posteriori filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x_hat: Vector,
    pub p: Matrix,
    /// `sᵢ⁺ = ∂x̂⁺/∂cᵢ`.
    pub sens: Vec<Vector>,
    /// `∂P⁺/∂cᵢ`.
    pub sens_p: Vec<Matrix>,
    pub step_index: usize,
    pub diagnostics: Option<StepDiagnostics>,
}

impl FilterState {
    /// Initial state with zero sensitivities: a freshly specified prior does
    /// not depend on the parameters.
    pub fn new(x_hat: Vector, p: Matrix, param_dim: usize) -> Self {
        let n = x_hat.len();
        Self {
            x_hat,
            p,
            sens: vec![Vector::zeros(n); param_dim],
            sens_p: vec![Matrix::zeros(n, n); param_dim],
            step_index: 0,
            diagnostics: None,
        }
    }

    pub fn cost(&self, weights: &[Matrix]) -> f64 {
        desensitized_cost(&self.p, &self.sens, weights)
    }
}

/// `J_d = Tr(P) + Σᵢ sᵢᵀ·Wᵢ·sᵢ`. With no weights this is `Tr(P)`.
pub fn desensitized_cost(p: &Matrix, sens: &[Vector], weights: &[Matrix]) -> f64 {
    let penalty: f64 = weights.iter().zip(sens).map(|(w, s)| s.dot(&(w * s))).sum();
    p.trace() + penalty
}

/// Convenience wrapper owning a configuration and the running state.
#[derive(Debug, Clone)]
pub struct CubatureFilter {
    pub config: FilterConfig,
    pub state: FilterState,
}

impl CubatureFilter {
    pub fn new(config: FilterConfig, x0: Vector, p0: Matrix) -> Self {
        let l = config.param_dim();
        Self { config, state: FilterState::new(x0, p0, l) }
    }

    /// Propagates from `t` to `t + dt` and assimilates `z`.
    pub fn step(&mut self, z: &Vector, u: &Vector, t: f64, dt: f64) -> Result<&FilterState, FilterError> {
        self.state = dckf_step(&self.state, &self.config, z, u, t, dt)?;
        Ok(&self.state)
    }
}
