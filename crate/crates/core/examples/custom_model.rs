//! Plugging in a user model. Only `dynamics` and `measure` are required;
//! Jacobians fall back to finite differences.
//!
//! The model is a pendulum with uncertain damping observed through its
//! horizontal bob position.

use std::sync::Arc;

use desens_ckf::filter::{FilterConfig, FilterMode};
use desens_ckf::models::{rk4_step, JacobianMode};
use desens_ckf::{CubatureFilter, Matrix, NoiseSpec, ParametricModel, Vector};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

struct Pendulum;

impl ParametricModel for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }
    fn meas_dim(&self) -> usize {
        1
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn dynamics(&self, x: &Vector, c: &Vector, _u: &Vector, _t: f64) -> Vector {
        Vector::from_row_slice(&[x[1], -9.81 * x[0].sin() - c[0] * x[1]])
    }
    fn measure(&self, x: &Vector, _c: &Vector, _u: &Vector) -> Vector {
        Vector::from_element(1, x[0].sin())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model: Arc<dyn ParametricModel> = Arc::new(Pendulum);
    let (dt, steps, c_true, c_ref) = (0.02, 250, 0.35, 0.2);
    let noise = NoiseSpec::new(Matrix::identity(2, 2) * 1e-6, Matrix::from_element(1, 1, 1e-3))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let v = Normal::new(0.0, noise.r[(0, 0)].sqrt())?;

    let make = |mode, weight: f64| {
        FilterConfig::new(
            model.clone(),
            noise.clone(),
            Vector::from_element(1, c_ref),
            vec![Matrix::identity(2, 2) * weight],
            mode,
        )
        .map(|c| c.with_jacobian_mode(JacobianMode::FiniteDifference).with_sensitivity_tracking(true))
    };
    let x0 = Vector::from_row_slice(&[0.8, 0.0]);
    let p0 = Matrix::identity(2, 2) * 0.05;
    let mut ckf = CubatureFilter::new(make(FilterMode::Ckf, 0.0)?, x0.clone(), p0.clone());
    let mut dckf = CubatureFilter::new(make(FilterMode::Dckf, 0.5)?, x0.clone(), p0);

    let (u, c) = (Vector::zeros(0), Vector::from_element(1, c_true));
    let mut x = x0;
    let (mut e_ckf, mut e_dckf) = (0.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * dt;
        x = rk4_step(model.as_ref(), &x, &c, &u, t, dt)?;
        let z = model.measure(&x, &c, &u) + Vector::from_element(1, v.sample(&mut rng));
        e_ckf += (&ckf.step(&z, &u, t, dt)?.x_hat - &x).norm_squared();
        e_dckf += (&dckf.step(&z, &u, t, dt)?.x_hat - &x).norm_squared();
    }
    println!("true damping {c_true}, filters assume {c_ref}");
    println!("ckf : rms error {:.4e}, final |s| {:.4e}", (e_ckf / steps as f64).sqrt(), ckf.state.sens[0].norm());
    println!("dckf: rms error {:.4e}, final |s| {:.4e}", (e_dckf / steps as f64).sqrt(), dckf.state.sens[0].norm());
    Ok(())
}
