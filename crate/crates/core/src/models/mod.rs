//! System models with uncertain parameters.
//!
//! A model supplies continuous-time dynamics `ẋ = f(x, c, u, t)` and a
//! measurement map `z = h(x, c, u)`, together with their Jacobians with
//! respect to the state `x` and the uncertain parameters `c`. The filters
//! only ever see the discrete flow produced by [`rk4_step`] and its tangent
//! from [`rk4_step_with_tangent`].

mod falling_body;
mod helicopter;
mod linear;
mod rk4;

pub use falling_body::{falling_body_model, FallingBody};
pub use helicopter::{helicopter_model, Helicopter};
pub use linear::LinearModel;
pub use rk4::{rk4_step, rk4_step_fd_tangent, rk4_step_with_tangent, DiscreteStepResult};

use crate::linalg::{self, Matrix, Vector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("integration produced a non-finite state at stage {stage}")]
    NonFiniteState { stage: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("invalid noise covariance: {0}")]
    InvalidNoise(String),
}

/// How the filters obtain Jacobians of the discrete flow and measurement map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Variational RK4 driven by the model's Jacobian methods.
    #[default]
    Analytic,
    /// Central finite differences of the discrete step and of `h`.
    FiniteDifference,
}

/// Relative central-difference step.
const FD_REL_STEP: f64 = 6.0e-6;

fn fd_step(v: f64) -> f64 {
    FD_REL_STEP * v.abs().max(1.0)
}

/// Central-difference Jacobian of `g` at `at`, column by column.
pub(crate) fn central_jacobian(at: &Vector, rows: usize, g: impl Fn(&Vector) -> Vector) -> Matrix {
    let mut jac = Matrix::zeros(rows, at.len());
    let mut probe = at.clone();
    for j in 0..at.len() {
        let h = fd_step(at[j]);
        probe[j] = at[j] + h;
        let plus = g(&probe);
        probe[j] = at[j] - h;
        let minus = g(&probe);
        probe[j] = at[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    jac
}

/// A nonlinear system with uncertain parameters.
///
/// The Jacobian methods default to central finite differences; models with
/// closed-form derivatives should override them.
pub trait ParametricModel: Send + Sync {
    fn state_dim(&self) -> usize;
    fn meas_dim(&self) -> usize;
    fn param_dim(&self) -> usize;

    /// Continuous-time right-hand side `f(x, c, u, t)`.
    fn dynamics(&self, x: &Vector, c: &Vector, u: &Vector, t: f64) -> Vector;

    /// Measurement map `h(x, c, u)`.
    fn measure(&self, x: &Vector, c: &Vector, u: &Vector) -> Vector;

    /// `∂f/∂x`, `n × n`.
    fn dynamics_jac_x(&self, x: &Vector, c: &Vector, u: &Vector, t: f64) -> Matrix {
        central_jacobian(x, self.state_dim(), |xp| self.dynamics(xp, c, u, t))
    }

    /// `∂f/∂c`, `n × ℓ`.
    fn dynamics_jac_c(&self, x: &Vector, c: &Vector, u: &Vector, t: f64) -> Matrix {
        central_jacobian(c, self.state_dim(), |cp| self.dynamics(x, cp, u, t))
    }

    /// `∂h/∂x`, `m × n`.
    fn measure_jac_x(&self, x: &Vector, c: &Vector, u: &Vector) -> Matrix {
        central_jacobian(x, self.meas_dim(), |xp| self.measure(xp, c, u))
    }

    /// `∂h/∂c`, `m × ℓ`.
    fn measure_jac_c(&self, x: &Vector, c: &Vector, u: &Vector) -> Matrix {
        central_jacobian(c, self.meas_dim(), |cp| self.measure(x, cp, u))
    }
}

/// Measurement Jacobians `(∂h/∂x, ∂h/∂c)` under the requested mode.
pub fn measurement_jacobians(
    model: &dyn ParametricModel,
    mode: JacobianMode,
    x: &Vector,
    c: &Vector,
    u: &Vector,
) -> (Matrix, Matrix) {
    match mode {
        JacobianMode::Analytic => (model.measure_jac_x(x, c, u), model.measure_jac_c(x, c, u)),
        JacobianMode::FiniteDifference => (
            central_jacobian(x, model.meas_dim(), |xp| model.measure(xp, c, u)),
            central_jacobian(c, model.meas_dim(), |cp| model.measure(x, cp, u)),
        ),
    }
}

/// Discrete-time noise covariances: process `Q` (positive semi-definite)
/// and measurement `R` (positive definite).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub q: Matrix,
    pub r: Matrix,
}

impl NoiseSpec {
    pub fn new(q: Matrix, r: Matrix) -> Result<Self, ModelError> {
        if !linalg::is_symmetric(&q) {
            return Err(ModelError::InvalidNoise("Q must be square and symmetric".into()));
        }
        if !linalg::is_symmetric(&r) {
            return Err(ModelError::InvalidNoise("R must be square and symmetric".into()));
        }
        let min_q = q.clone().symmetric_eigenvalues().min();
        if min_q < -1e-12 * q.norm().max(1.0) {
            return Err(ModelError::InvalidNoise(format!("Q has negative eigenvalue {min_q:e}")));
        }
        linalg::cholesky(&r).map_err(|e| ModelError::InvalidNoise(format!("R: {e}")))?;
        Ok(Self { q, r })
    }

    /// Zero process noise and measurement noise `R`.
    pub fn measurement_only(n: usize, r: Matrix) -> Result<Self, ModelError> {
        Self::new(Matrix::zeros(n, n), r)
    }
}
