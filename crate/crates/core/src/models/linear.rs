use super::ParametricModel;
use crate::linalg::{Matrix, Vector};

/// Linear time-invariant model `ẋ = (A₀ + Σᵢ cᵢ·Aᵢ)·x`, `z = H·x`.
///
/// Mostly useful as a test bed: the cubature rule is exact for it, so every
/// filter quantity has a closed-form counterpart.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a0: Matrix,
    pub a_params: Vec<Matrix>,
    pub h: Matrix,
}

impl LinearModel {
    pub fn new(a0: Matrix, a_params: Vec<Matrix>, h: Matrix) -> Self {
        assert!(a0.is_square(), "A₀ must be square");
        assert!(a_params.iter().all(|a| a.shape() == a0.shape()), "parameter matrices must match A₀");
        assert_eq!(h.ncols(), a0.nrows(), "H must have n columns");
        Self { a0, a_params, h }
    }

    /// `A(c) = A₀ + Σᵢ cᵢ·Aᵢ`.
    pub fn system_matrix(&self, c: &Vector) -> Matrix {
        let mut a = self.a0.clone();
        for (ai, ci) in self.a_params.iter().zip(c.iter()) {
            a += ai * *ci;
        }
        a
    }

    /// Discrete transition matrix of one RK4 step:
    /// `I + A·dt + (A·dt)²/2 + (A·dt)³/6 + (A·dt)⁴/24`.
    pub fn rk4_transition(&self, c: &Vector, dt: f64) -> Matrix {
        let n = self.a0.nrows();
        let ad = self.system_matrix(c) * dt;
        let mut term = Matrix::identity(n, n);
        let mut sum = term.clone();
        for k in 1..=4 {
            term = &term * &ad / k as f64;
            sum += &term;
        }
        sum
    }
}

impl ParametricModel for LinearModel {
    fn state_dim(&self) -> usize {
        self.a0.nrows()
    }

    fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    fn param_dim(&self) -> usize {
        self.a_params.len()
    }

    fn dynamics(&self, x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Vector {
        self.system_matrix(c) * x
    }

    fn measure(&self, x: &Vector, _c: &Vector, _u: &Vector) -> Vector {
        &self.h * x
    }

    fn dynamics_jac_x(&self, _x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Matrix {
        self.system_matrix(c)
    }

    fn dynamics_jac_c(&self, x: &Vector, _c: &Vector, _u: &Vector, _t: f64) -> Matrix {
        let mut jac = Matrix::zeros(self.a0.nrows(), self.a_params.len());
        for (i, ai) in self.a_params.iter().enumerate() {
            jac.set_column(i, &(ai * x));
        }
        jac
    }

    fn measure_jac_x(&self, _x: &Vector, _c: &Vector, _u: &Vector) -> Matrix {
        self.h.clone()
    }

    fn measure_jac_c(&self, _x: &Vector, _c: &Vector, _u: &Vector) -> Matrix {
        Matrix::zeros(self.h.nrows(), self.a_params.len())
    }
}
