mod common;

use common::rel;
use desens_ckf::models::{
    falling_body_model, helicopter_model, rk4_step, rk4_step_fd_tangent, rk4_step_with_tangent, ParametricModel,
};
use desens_ckf::{Matrix, Vector};
use proptest::prelude::*;

/// Central differences of `g` with per-coordinate relative steps.
fn fd_jacobian(at: &Vector, g: impl Fn(&Vector) -> Vector) -> Matrix {
    let rows = g(at).len();
    let mut jac = Matrix::zeros(rows, at.len());
    for j in 0..at.len() {
        let h = 1e-6 * at[j].abs().max(1e-3);
        let mut p = at.clone();
        p[j] += h;
        let mut m = at.clone();
        m[j] -= h;
        jac.set_column(j, &((g(&p) - g(&m)) / (2.0 * h)));
    }
    jac
}

/// `J·diag(|x|)`: the response to relative perturbations of each state.
/// States of very different magnitude (altitude against ballistic
/// coefficient) are then compared on a common footing.
fn scaled(j: &Matrix, x: &Vector) -> Matrix {
    j * Matrix::from_diagonal(&x.map(|v| v.abs().max(1e-3)))
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    (a - b).norm() <= tol * b.norm().max(1e-12)
}

fn falling_state() -> impl Strategy<Value = (Vector, Vector)> {
    (1.0e5f64..3.0e5, -2.2e4f64..-5.0e3, 1e-4f64..2e-3, 1.5e4f64..2.5e4)
        .prop_map(|(a, v, b, c)| (Vector::from_row_slice(&[a, v, b]), Vector::from_element(1, c)))
}

fn helicopter_state() -> impl Strategy<Value = (Vector, Vector)> {
    (prop::array::uniform4(-1.0f64..1.0), -0.15f64..-0.05, 0.05f64..0.15)
        .prop_map(|(x, c1, c2)| (Vector::from_row_slice(&x), Vector::from_row_slice(&[c1, c2])))
}

fn check_model(model: &dyn ParametricModel, x: &Vector, c: &Vector, dt: f64) -> Result<(), TestCaseError> {
    let u = Vector::zeros(0);
    prop_assert!(close(&model.dynamics_jac_x(x, c, &u, 0.0), &fd_jacobian(x, |xp| model.dynamics(xp, c, &u, 0.0)), 1e-6));
    prop_assert!(close(&model.dynamics_jac_c(x, c, &u, 0.0), &fd_jacobian(c, |cp| model.dynamics(x, cp, &u, 0.0)), 1e-6));
    prop_assert!(close(&model.measure_jac_x(x, c, &u), &fd_jacobian(x, |xp| model.measure(xp, c, &u)), 1e-6));

    let flow = rk4_step_with_tangent(model, x, c, &u, 0.0, dt).unwrap();
    // The tangent must not perturb the state itself.
    prop_assert_eq!(&flow.x_next, &rk4_step(model, x, c, &u, 0.0, dt).unwrap());
    let step = |xp: &Vector, cp: &Vector| rk4_step(model, xp, cp, &u, 0.0, dt).unwrap();
    prop_assert!(close(&scaled(&flow.phi_x, x), &scaled(&fd_jacobian(x, |xp| step(xp, c)), x), 1e-6));
    // At high altitude ∂x/∂c is tiny and the difference quotient is limited
    // by roundoff in x itself, about eps·|x|/h.
    let floor = 100.0 * f64::EPSILON * flow.x_next.norm() / (1e-6 * c.amax().max(1e-3));
    let fdc = fd_jacobian(c, |cp| step(x, cp));
    prop_assert!((&flow.phi_c - &fdc).norm() <= 1e-5 * fdc.norm() + floor);
    let fd = rk4_step_fd_tangent(model, x, c, &u, 0.0, dt).unwrap();
    prop_assert_eq!(&fd.x_next, &flow.x_next);
    prop_assert!(close(&scaled(&fd.phi_x, x), &scaled(&flow.phi_x, x), 1e-5));

    // Chain rule across two steps: Φ(2 steps) = Φ₂·Φ₁, and the parameter
    // tangent accumulates as Φ₂ₓ·Φ₁c + Φ₂c.
    let second = rk4_step_with_tangent(model, &flow.x_next, c, &u, dt, dt).unwrap();
    let two = |xp: &Vector, cp: &Vector| {
        let mid = rk4_step(model, xp, cp, &u, 0.0, dt).unwrap();
        rk4_step(model, &mid, cp, &u, dt, dt).unwrap()
    };
    prop_assert!(close(&scaled(&(&second.phi_x * &flow.phi_x), x), &scaled(&fd_jacobian(x, |xp| two(xp, c)), x), 1e-5));
    let fdc2 = fd_jacobian(c, |cp| two(x, cp));
    prop_assert!((&second.phi_x * &flow.phi_c + &second.phi_c - &fdc2).norm() <= 1e-5 * fdc2.norm() + 2.0 * floor);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn falling_body_derivatives((x, c) in falling_state()) {
        check_model(&falling_body_model(), &x, &c, 0.1)?;
    }

    #[test]
    fn helicopter_derivatives((x, c) in helicopter_state()) {
        check_model(&helicopter_model(), &x, &c, 0.05)?;
    }
}

#[test]
fn helicopter_flow_is_matrix_exponential_to_fourth_order() {
    let model = helicopter_model();
    let c = Vector::from_row_slice(&[-0.1, 0.1]);
    let a = model.closed_loop(&c);
    let dt = 0.05;
    let x = Vector::from_row_slice(&[0.7929, -0.0466, -0.1871, 0.578]);
    let exact = (&a * dt).exp() * &x;
    let step = rk4_step(&model, &x, &c, &Vector::zeros(0), 0.0, dt).unwrap();
    // Local RK4 error is O(‖A·dt‖⁵).
    let bound = (a.norm() * dt).powi(5) * x.norm();
    assert!((&step - &exact).norm() <= bound, "{} > {bound}", (&step - &exact).norm());
    assert!(rel(&Matrix::from_column_slice(4, 1, step.as_slice()), &Matrix::from_column_slice(4, 1, exact.as_slice())) < 1e-4);
}
