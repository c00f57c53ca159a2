//! Third-degree spherical-radial cubature points.

use crate::linalg::{LowerTriangular, Matrix, Vector};

/// Cubature points and, optionally, their sensitivities to each uncertain
/// parameter (`point_sens[i][j] = ∂χⱼ/∂cᵢ`).
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureSet {
    pub points: Vec<Vector>,
    pub point_sens: Vec<Vec<Vector>>,
}

impl CubatureSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unit directions `√n·{e₁, …, eₙ, −e₁, …, −eₙ}`.
pub fn cubature_directions(n: usize) -> Vec<Vector> {
    let r = (n as f64).sqrt();
    (0..2 * n)
        .map(|j| {
            let mut xi = Vector::zeros(n);
            xi[j % n] = if j < n { r } else { -r };
            xi
        })
        .collect()
}

/// `χⱼ = L·ξⱼ + x̂`, in direction order.
pub fn generate_cubature_points(x_hat: &Vector, l: &LowerTriangular) -> Vec<Vector> {
    let n = x_hat.len();
    let r = (n as f64).sqrt();
    let mut points = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        for col in 0..n {
            points.push(x_hat + l.column(col) * (sign * r));
        }
    }
    points
}

/// `∂χⱼ/∂cᵢ = dLᵢ·ξⱼ + sᵢ`.
pub fn generate_point_sensitivities(dl: &Matrix, s: &Vector) -> Vec<Vector> {
    let n = s.len();
    let r = (n as f64).sqrt();
    let mut out = Vec::with_capacity(2 * n);
    for sign in [1.0, -1.0] {
        for col in 0..n {
            out.push(s + dl.column(col) * (sign * r));
        }
    }
    out
}

/// Equal-weight mean of a point set.
pub fn mean(points: &[Vector]) -> Vector {
    let mut acc = Vector::zeros(points[0].len());
    for p in points {
        acc += p;
    }
    acc / points.len() as f64
}

/// `(1/N)·Σ (aⱼ − ā)(bⱼ − b̄)ᵀ`.
pub fn cross_covariance(a: &[Vector], a_mean: &Vector, b: &[Vector], b_mean: &Vector) -> Matrix {
    let mut acc = Matrix::zeros(a_mean.len(), b_mean.len());
    for (ai, bi) in a.iter().zip(b) {
        acc += (ai - a_mean) * (bi - b_mean).transpose();
    }
    acc / a.len() as f64
}

/// Derivative of [`cross_covariance`] given the point derivatives and the
/// derivatives of both means:
/// `(1/N)·Σ [(∂aⱼ − ∂ā)(bⱼ − b̄)ᵀ + (aⱼ − ā)(∂bⱼ − ∂b̄)ᵀ]`.
pub fn cross_covariance_derivative(
    a: &[Vector],
    a_mean: &Vector,
    da: &[Vector],
    da_mean: &Vector,
    b: &[Vector],
    b_mean: &Vector,
    db: &[Vector],
    db_mean: &Vector,
) -> Matrix {
    let mut acc = Matrix::zeros(a_mean.len(), b_mean.len());
    for j in 0..a.len() {
        acc += (&da[j] - da_mean) * (&b[j] - b_mean).transpose() + (&a[j] - a_mean) * (&db[j] - db_mean).transpose();
    }
    acc / a.len() as f64
}
