use super::ParametricModel;
use crate::linalg::{Matrix, Vector};

/// Hovering helicopter under LQR state feedback.
///
/// `ẋ = (A(c) − B·K_lqr)·x` with two uncertain entries `c₁, c₂` in the first
/// row of `A`, and the full state measured directly (`z = x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Helicopter {
    pub gravity: f64,
    pub input: [f64; 4],
    pub k_lqr: [f64; 4],
}

impl Default for Helicopter {
    fn default() -> Self {
        Self { gravity: 0.322, input: [0.086, -7.408, 0.0, 0.0], k_lqr: [1.989, -0.256, -0.7589, 1.0] }
    }
}

pub fn helicopter_model() -> Helicopter {
    Helicopter::default()
}

impl Helicopter {
    /// Open-loop `A(c)`.
    pub fn open_loop(&self, c: &Vector) -> Matrix {
        #[rustfmt::skip]
        let a = Matrix::from_row_slice(4, 4, &[
            c[0], c[1], -self.gravity, 0.0,
            1.26, -1.765, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
        ]);
        a
    }

    /// Closed-loop `A(c) − B·K_lqr`.
    pub fn closed_loop(&self, c: &Vector) -> Matrix {
        let b = Matrix::from_column_slice(4, 1, &self.input);
        let k = Matrix::from_row_slice(1, 4, &self.k_lqr);
        self.open_loop(c) - b * k
    }
}

impl ParametricModel for Helicopter {
    fn state_dim(&self) -> usize {
        4
    }

    fn meas_dim(&self) -> usize {
        4
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn dynamics(&self, x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Vector {
        self.closed_loop(c) * x
    }

    fn measure(&self, x: &Vector, _c: &Vector, _u: &Vector) -> Vector {
        x.clone()
    }

    fn dynamics_jac_x(&self, _x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Matrix {
        self.closed_loop(c)
    }

    fn dynamics_jac_c(&self, x: &Vector, _c: &Vector, _u: &Vector, _t: f64) -> Matrix {
        let mut jac = Matrix::zeros(4, 2);
        jac[(0, 0)] = x[0];
        jac[(0, 1)] = x[1];
        jac
    }

    fn measure_jac_x(&self, _x: &Vector, _c: &Vector, _u: &Vector) -> Matrix {
        Matrix::identity(4, 4)
    }

    fn measure_jac_c(&self, _x: &Vector, _c: &Vector, _u: &Vector) -> Matrix {
        Matrix::zeros(4, 2)
    }
}
