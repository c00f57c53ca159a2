//! Dense linear-algebra primitives used by the filters.
//!
//! Everything here works on `nalgebra` dynamic matrices. The routines cover
//! exactly what the cubature filters consume: a Cholesky factorization with
//! an explicit pivot test, the derivative of the Cholesky factor with respect
//! to a perturbation of the factored matrix, and the generalized gain equation
//! that arises when the posterior cost is penalized by weighted sensitivities.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative pivot threshold for [`cholesky`]: pivot `j` must exceed this
/// fraction of `P_jj`.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-13;

/// Symmetry tolerance relative to `max(1, ‖P‖_F)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

const SINGULAR_SYSTEM_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite: pivot {index} is {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("triangular factor has a near-zero diagonal entry at {index}")]
    SingularFactor { index: usize },
    #[error("linear system is numerically singular")]
    SingularSystem,
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Lower-triangular square matrix with a positive diagonal, as produced by
/// [`cholesky`].
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    /// Wraps `m`, whose strict upper triangle must be exactly zero.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "triangular factor must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                if m[(i, j)] != 0.0 {
                    return Err(LinalgError::DimensionMismatch(format!(
                        "entry ({i},{j}) above the diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl std::ops::Deref for LowerTriangular {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Largest absolute asymmetry `|P_ij - P_ji|`.
pub fn asymmetry(p: &Matrix) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((p[(i, j)] - p[(j, i)]).abs());
        }
    }
    worst
}

/// Whether `p` is square and symmetric to `SYMMETRY_TOL · max(1, ‖p‖_F)`.
pub fn is_symmetric(p: &Matrix) -> bool {
    p.is_square() && asymmetry(p) <= SYMMETRY_TOL * p.norm().max(1.0)
}

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `‖a − b‖_F / max(floor, ‖b‖_F)`.
pub fn rel_frobenius(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

/// Cholesky factorization `P = L·Lᵀ` with `L` lower triangular.
///
/// A pivot is rejected when it is not larger than [`CHOLESKY_PIVOT_TOL`]
/// times its own diagonal entry `P_jj`. The test is invariant under diagonal
/// scaling, so states with very different units are judged alike.
pub fn cholesky(p: &Matrix) -> Result<LowerTriangular> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "cholesky needs a non-empty square matrix, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    check_finite(p)?;
    let asym = asymmetry(p);
    if asym > SYMMETRY_TOL * p.norm().max(1.0) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }

    let n = p.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > CHOLESKY_PIVOT_TOL * p[(j, j)]) || p[(j, j)] <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            // Lower triangle of P only; the upper one is trusted to mirror it.
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular(l))
}

/// Solves `L·X = B` by forward substitution.
fn forward_solve(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Derivative of the Cholesky factor.
///
/// Given `L = chol(P)` and a symmetric perturbation `dP`, returns the unique
/// lower-triangular `dL` with `dL·Lᵀ + L·dLᵀ = dP`. With
/// `X = L⁻¹·dP·L⁻ᵀ`, the solution is `dL = L·Φ(X)` where `Φ` keeps the strict
/// lower triangle of `X` and half of its diagonal.
pub fn sqrt_sensitivity(l: &LowerTriangular, dp: &Matrix) -> Result<Matrix> {
    let n = l.dim();
    if dp.nrows() != n || dp.ncols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "factor is {n}x{n} but perturbation is {}x{}",
            dp.nrows(),
            dp.ncols()
        )));
    }
    check_finite(dp)?;
    let max_diag = (0..n).map(|i| l[(i, i)].abs()).fold(0.0_f64, f64::max);
    for i in 0..n {
        if !(l[(i, i)].abs() > f64::EPSILON * max_diag) {
            return Err(LinalgError::SingularFactor { index: i });
        }
    }

    // X = L⁻¹ dP L⁻ᵀ; the second solve works on the transpose.
    let y = forward_solve(l, dp);
    let x = forward_solve(l, &y.transpose());
    let mut phi = Matrix::zeros(n, n);
    for j in 0..n {
        // Symmetric in exact arithmetic; average to suppress roundoff skew.
        phi[(j, j)] = 0.5 * x[(j, j)];
        for i in (j + 1)..n {
            phi[(i, j)] = 0.5 * (x[(i, j)] + x[(j, i)]);
        }
    }
    let mut dl = l.as_matrix() * phi;
    for j in 0..n {
        for i in 0..j {
            dl[(i, j)] = 0.0;
        }
    }
    Ok(dl)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a `rows × cols` matrix.
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Solves `A·x = b` by LU with partial pivoting, reporting singular systems.
fn dense_solve(a: Matrix, b: &Vector) -> Result<Vector> {
    let scale = a.amax();
    let lu = a.lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min_pivot > SINGULAR_SYSTEM_TOL * scale) {
        return Err(LinalgError::SingularSystem);
    }
    let x = lu.solve(b).ok_or(LinalgError::SingularSystem)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(LinalgError::SingularSystem)
    }
}

/// Left-hand side operator `K ↦ K·Pzz + Σᵢ Wᵢ·K·γᵢγᵢᵀ` of the desensitized
/// gain equation, applied to a candidate gain.
pub fn gain_equation_lhs(k: &Matrix, pzz: &Matrix, weights: &[Matrix], gamma: &[Vector]) -> Matrix {
    let mut lhs = k * pzz;
    for (w, g) in weights.iter().zip(gamma) {
        lhs += w * k * (g * g.transpose());
    }
    lhs
}

/// Right-hand side `Pxz + Σᵢ Wᵢ·sᵢ⁻·γᵢᵀ` of the desensitized gain equation.
pub fn gain_equation_rhs(pxz: &Matrix, weights: &[Matrix], s_minus: &[Vector], gamma: &[Vector]) -> Matrix {
    let mut rhs = pxz.clone();
    for ((w, s), g) in weights.iter().zip(s_minus).zip(gamma) {
        rhs += w * s * g.transpose();
    }
    rhs
}

/// Solves the desensitized gain equation
///
/// ```text
/// K·Pzz + Σᵢ Wᵢ·K·γᵢγᵢᵀ = Pxz + Σᵢ Wᵢ·sᵢ⁻·γᵢᵀ
/// ```
///
/// for the `n × m` gain `K`, by vectorizing it into the `(n·m)`-dimensional
/// system `(Pzzᵀ ⊗ Iₙ + Σᵢ γᵢγᵢᵀ ⊗ Wᵢ)·vec(K) = vec(RHS)`. With no
/// weights, or only zero ones, this is the ordinary Kalman gain
/// `Pxz·Pzz⁻¹` and is computed as such.
pub fn solve_desensitized_gain(
    pzz: &Matrix,
    pxz: &Matrix,
    weights: &[Matrix],
    s_minus: &[Vector],
    gamma: &[Vector],
) -> Result<Matrix> {
    let m = pzz.nrows();
    let n = pxz.nrows();
    if !pzz.is_square() || pxz.ncols() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "Pzz is {}x{}, Pxz is {}x{}",
            pzz.nrows(),
            pzz.ncols(),
            pxz.nrows(),
            pxz.ncols()
        )));
    }
    if weights.len() != s_minus.len() || weights.len() != gamma.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{} weights, {} sensitivities, {} measurement sensitivities",
            weights.len(),
            s_minus.len(),
            gamma.len()
        )));
    }
    for ((w, s), g) in weights.iter().zip(s_minus).zip(gamma) {
        if w.nrows() != n || w.ncols() != n || s.len() != n || g.len() != m {
            return Err(LinalgError::DimensionMismatch(format!(
                "weight {}x{}, sensitivity {}, measurement sensitivity {} (n = {n}, m = {m})",
                w.nrows(),
                w.ncols(),
                s.len(),
                g.len()
            )));
        }
    }
    check_finite(pzz)?;
    check_finite(pxz)?;
    // All-zero weights leave the block-diagonal operator Pzzᵀ ⊗ Iₙ.
    if weights.iter().all(|w| w.iter().all(|v| *v == 0.0)) {
        return kalman_gain(pzz, pxz);
    }

    let mut op = kron(&pzz.transpose(), &Matrix::identity(n, n));
    for (w, g) in weights.iter().zip(gamma) {
        op += kron(&(g * g.transpose()), w);
    }
    let rhs = gain_equation_rhs(pxz, weights, s_minus, gamma);
    let k = dense_solve(op, &vec(&rhs))?;
    Ok(unvec(&k, n, m))
}

/// Ordinary Kalman gain `Pxz·Pzz⁻¹`, computed through the Cholesky factor of
/// `Pzz`.
pub fn kalman_gain(pzz: &Matrix, pxz: &Matrix) -> Result<Matrix> {
    let l = cholesky(pzz)?;
    if pxz.ncols() != l.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "Pxz has {} columns, Pzz is {}x{}",
            pxz.ncols(),
            l.dim(),
            l.dim()
        )));
    }
    // K·L·Lᵀ = Pxz  ⇔  L·Lᵀ·Kᵀ = Pxzᵀ
    let y = forward_solve(&l, &pxz.transpose());
    let kt = l.transpose().solve_upper_triangular(&y).ok_or(LinalgError::SingularFactor { index: 0 })?;
    Ok(kt.transpose())
}
