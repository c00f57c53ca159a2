//! Cubature Kalman filtering for nonlinear systems with uncertain model
//! parameters.
//!
//! The crate provides
//!
//! - [`linalg`]: Cholesky factorization, the Cholesky-factor derivative and
//!   the desensitized gain equation solver;
//! - [`models`]: the model abstraction, RK4 discretization with exact
//!   tangent propagation, and two benchmark models (a falling body tracked
//!   by radar and a hovering helicopter);
//! - [`filter`]: the cubature Kalman filter (CKF) and the desensitized CKF
//!   (DCKF) with full sensitivity propagation;
//! - [`harness`]: a reproducible Monte Carlo engine comparing perfect,
//!   imperfect and desensitized filters (RMSE, sensitivities, cost, NME);
//! - [`cli`]: the `desens-ckf` command-line front end and its file formats.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod filter;
pub mod harness;
pub mod linalg;
pub mod models;

pub use filter::{CubatureFilter, FilterConfig, FilterMode, FilterState};
pub use linalg::{Matrix, Vector};
pub use models::{NoiseSpec, ParametricModel};
