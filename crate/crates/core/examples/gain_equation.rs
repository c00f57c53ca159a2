//! Solves the desensitized gain equation for a small random instance and
//! shows how the weights trade covariance against sensitivity.

use desens_ckf::linalg::{gain_equation_lhs, gain_equation_rhs, kalman_gain, solve_desensitized_gain};
use desens_ckf::{Matrix, Vector};

fn cost(k: &Matrix, p: &Matrix, pxz: &Matrix, pzz: &Matrix) -> f64 {
    (p - pxz * k.transpose() - k * pxz.transpose() + k * pzz * k.transpose()).trace()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Matrix::from_row_slice(3, 3, &[4.0, 0.5, 0.1, 0.5, 2.0, 0.2, 0.1, 0.2, 1.0]);
    let h = Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    let pzz = &h * &p * h.transpose() + Matrix::identity(2, 2) * 0.5;
    let pxz = &p * h.transpose();
    let s_minus = vec![Vector::from_row_slice(&[1.0, -0.5, 0.2])];
    let gamma = vec![&h * &s_minus[0] * 0.8];

    let k0 = kalman_gain(&pzz, &pxz)?;
    println!("Kalman gain: Tr(P+) = {:.4}, |s+| = {:.4}", cost(&k0, &p, &pxz, &pzz), (&s_minus[0] - &k0 * &gamma[0]).norm());
    for scale in [0.1, 1.0, 10.0, 100.0] {
        let w = vec![Matrix::identity(3, 3) * scale];
        let k = solve_desensitized_gain(&pzz, &pxz, &w, &s_minus, &gamma)?;
        let residual = (gain_equation_lhs(&k, &pzz, &w, &gamma) - gain_equation_rhs(&pxz, &w, &s_minus, &gamma)).norm();
        println!(
            "W = {scale:>5} I: Tr(P+) = {:.4}, |s+| = {:.4}, residual {residual:.1e}",
            cost(&k, &p, &pxz, &pzz),
            (&s_minus[0] - &k * &gamma[0]).norm()
        );
    }
    Ok(())
}
