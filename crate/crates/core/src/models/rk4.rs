use super::{central_jacobian, ModelError, ParametricModel};
use crate::linalg::{Matrix, Vector};

/// One discrete step of the flow together with its Jacobians.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStepResult {
    pub x_next: Vector,
    /// `∂x_next/∂x`, `n × n`.
    pub phi_x: Matrix,
    /// `∂x_next/∂c`, `n × ℓ`.
    pub phi_c: Matrix,
}

struct Tangent {
    dx: Matrix,
    dc: Matrix,
}

fn finite_or(stage: usize, v: Vector) -> Result<Vector, ModelError> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(v)
    } else {
        Err(ModelError::NonFiniteState { stage })
    }
}

fn check_dt(dt: f64) -> Result<(), ModelError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidStep(dt))
    }
}

/// Shared RK4 kernel. The state arithmetic is identical whether or not the
/// tangent is carried, so both public entry points agree bit for bit.
fn integrate(
    model: &dyn ParametricModel,
    x: &Vector,
    c: &Vector,
    u: &Vector,
    t: f64,
    dt: f64,
    with_tangent: bool,
) -> Result<(Vector, Option<Tangent>), ModelError> {
    check_dt(dt)?;
    let n = x.len();
    let l = c.len();
    let half = 0.5 * dt;
    let offsets = [0.0, half, half, dt];
    let times = [t, t + half, t + half, t + dt];

    let mut ks: Vec<Vector> = Vec::with_capacity(4);
    let mut dks: Vec<Tangent> = Vec::with_capacity(4);
    for stage in 0..4 {
        let (xs, ts) = if stage == 0 {
            (x.clone(), None)
        } else {
            let prev = &ks[stage - 1];
            let xs = finite_or(stage, x + prev * offsets[stage])?;
            let ts = dks.last().map(|d: &Tangent| Tangent {
                dx: Matrix::identity(n, n) + &d.dx * offsets[stage],
                dc: &d.dc * offsets[stage],
            });
            (xs, ts)
        };
        let k = finite_or(stage, model.dynamics(&xs, c, u, times[stage]))?;
        if with_tangent {
            let fx = model.dynamics_jac_x(&xs, c, u, times[stage]);
            let fc = model.dynamics_jac_c(&xs, c, u, times[stage]);
            let d = match ts {
                None => Tangent { dx: fx, dc: fc },
                Some(ts) => Tangent { dx: &fx * &ts.dx, dc: &fx * &ts.dc + fc },
            };
            dks.push(d);
        }
        ks.push(k);
    }
    let x_next = finite_or(4, x + (&ks[0] + &ks[1] * 2.0 + &ks[2] * 2.0 + &ks[3]) * (dt / 6.0))?;

    let tangent = with_tangent.then(|| {
        let sixth = dt / 6.0;
        let dx = Matrix::identity(n, n) + (&dks[0].dx + &dks[1].dx * 2.0 + &dks[2].dx * 2.0 + &dks[3].dx) * sixth;
        let dc = if l == 0 {
            Matrix::zeros(n, 0)
        } else {
            (&dks[0].dc + &dks[1].dc * 2.0 + &dks[2].dc * 2.0 + &dks[3].dc) * sixth
        };
        Tangent { dx, dc }
    });
    Ok((x_next, tangent))
}

/// Classic fourth-order Runge-Kutta step of `ẋ = f(x, c, u, t)` over `dt`.
pub fn rk4_step(
    model: &dyn ParametricModel,
    x: &Vector,
    c: &Vector,
    u: &Vector,
    t: f64,
    dt: f64,
) -> Result<Vector, ModelError> {
    integrate(model, x, c, u, t, dt, false).map(|(x, _)| x)
}

/// RK4 step with its exact Jacobians, obtained by differentiating each stage
/// through the chain rule (variational RK4).
pub fn rk4_step_with_tangent(
    model: &dyn ParametricModel,
    x: &Vector,
    c: &Vector,
    u: &Vector,
    t: f64,
    dt: f64,
) -> Result<DiscreteStepResult, ModelError> {
    let (x_next, tangent) = integrate(model, x, c, u, t, dt, true)?;
    let Tangent { dx, dc } = tangent.expect("tangent requested");
    Ok(DiscreteStepResult { x_next, phi_x: dx, phi_c: dc })
}

/// RK4 step whose Jacobians are central finite differences of [`rk4_step`].
/// Intended for models without analytic Jacobians.
pub fn rk4_step_fd_tangent(
    model: &dyn ParametricModel,
    x: &Vector,
    c: &Vector,
    u: &Vector,
    t: f64,
    dt: f64,
) -> Result<DiscreteStepResult, ModelError> {
    let x_next = rk4_step(model, x, c, u, t, dt)?;
    let n = x.len();
    // Probe failures surface as NaN columns and are caught below.
    let nan = || Vector::from_element(n, f64::NAN);
    let phi_x = central_jacobian(x, n, |xp| rk4_step(model, xp, c, u, t, dt).unwrap_or_else(|_| nan()));
    let phi_c = central_jacobian(c, n, |cp| rk4_step(model, x, cp, u, t, dt).unwrap_or_else(|_| nan()));
    if phi_x.iter().chain(phi_c.iter()).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteState { stage: 0 });
    }
    Ok(DiscreteStepResult { x_next, phi_x, phi_c })
}
