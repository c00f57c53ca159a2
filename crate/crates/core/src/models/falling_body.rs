use super::ParametricModel;
use crate::linalg::{Matrix, Vector};

/// Vertically falling body tracked by a ranging radar.
///
/// State: altitude `x₁` (ft), velocity `x₂` (ft/s), ballistic coefficient
/// `x₃`. The single uncertain parameter `c` is the density scale height.
///
/// ```text
/// ẋ₁ = x₂
/// ẋ₂ = x₂²·x₃·exp(−x₁/c) − g
/// ẋ₃ = 0
/// z  = √(M² + (x₁ − H)²)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct FallingBody {
    /// Gravitational acceleration, ft/s².
    pub gravity: f64,
    /// Horizontal distance from the radar to the line of fall, ft.
    pub radar_range_offset: f64,
    /// Radar altitude above ground, ft.
    pub radar_altitude: f64,
}

impl Default for FallingBody {
    fn default() -> Self {
        Self { gravity: 32.2, radar_range_offset: 1.0e5, radar_altitude: 1.0e5 }
    }
}

pub fn falling_body_model() -> FallingBody {
    FallingBody::default()
}

impl FallingBody {
    fn drag(&self, x: &Vector, c: f64) -> f64 {
        x[1] * x[1] * x[2] * (-x[0] / c).exp()
    }

    fn range(&self, x: &Vector) -> f64 {
        let dy = x[0] - self.radar_altitude;
        (self.radar_range_offset * self.radar_range_offset + dy * dy).sqrt()
    }
}

impl ParametricModel for FallingBody {
    fn state_dim(&self) -> usize {
        3
    }

    fn meas_dim(&self) -> usize {
        1
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn dynamics(&self, x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Vector {
        Vector::from_row_slice(&[x[1], self.drag(x, c[0]) - self.gravity, 0.0])
    }

    fn measure(&self, x: &Vector, _c: &Vector, _u: &Vector) -> Vector {
        Vector::from_element(1, self.range(x))
    }

    fn dynamics_jac_x(&self, x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Matrix {
        let c = c[0];
        let e = (-x[0] / c).exp();
        let (v, b) = (x[1], x[2]);
        Matrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, -v * v * b * e / c, 2.0 * v * b * e, v * v * e, 0.0, 0.0, 0.0],
        )
    }

    fn dynamics_jac_c(&self, x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Matrix {
        let c = c[0];
        Matrix::from_column_slice(3, 1, &[0.0, self.drag(x, c) * x[0] / (c * c), 0.0])
    }

    fn measure_jac_x(&self, x: &Vector, _c: &Vector, _u: &Vector) -> Matrix {
        let dy = x[0] - self.radar_altitude;
        Matrix::from_row_slice(1, 3, &[dy / self.range(x), 0.0, 0.0])
    }

    fn measure_jac_c(&self, _x: &Vector, _c: &Vector, _u: &Vector) -> Matrix {
        Matrix::zeros(1, 1)
    }
}
