//! Time and measurement updates with sensitivity propagation.

use super::cubature::{
    cross_covariance, cross_covariance_derivative, generate_cubature_points, generate_point_sensitivities, mean,
    CubatureSet,
};
use super::{desensitized_cost, FilterConfig, FilterError, FilterMode, FilterState, StepDiagnostics};
use crate::linalg::{self, cholesky, sqrt_sensitivity, LinalgError, LowerTriangular, Matrix, Vector};
use crate::models::{measurement_jacobians, rk4_step, rk4_step_fd_tangent, rk4_step_with_tangent, JacobianMode};

/// Predicted (a priori) quantities for step `step_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub x_hat: Vector,
    pub p: Matrix,
    /// `sᵢ⁻ = ∂x̂⁻/∂cᵢ`; zeros when sensitivities are not tracked.
    pub sens: Vec<Vector>,
    /// `∂P⁻/∂cᵢ`.
    pub sens_p: Vec<Matrix>,
    /// Points pushed through the dynamics and their sensitivities.
    pub propagated: CubatureSet,
    pub step_index: usize,
}

/// Predicted measurement moments and their parameter sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementUpdateIntermediates {
    pub z_hat: Vector,
    pub pzz: Matrix,
    pub pxz: Matrix,
    /// `γᵢ = ∂ẑ⁻/∂cᵢ`.
    pub gamma: Vec<Vector>,
    pub d_pzz: Vec<Matrix>,
    pub d_pxz: Vec<Matrix>,
    /// Points redrawn from the prior, and their sensitivities.
    pub redrawn: CubatureSet,
}

fn factor(p: &Matrix, step: usize, stage: &'static str) -> Result<LowerTriangular, FilterError> {
    cholesky(p).map_err(|source| FilterError::NotPositiveDefinite { step, stage, source })
}

fn factor_sensitivity(l: &LowerTriangular, dp: &Matrix, step: usize, stage: &'static str) -> Result<Matrix, FilterError> {
    sqrt_sensitivity(l, dp).map_err(|source| FilterError::NotPositiveDefinite { step, stage, source })
}

/// Propagates the posterior at step `k − 1` to the prior at step `k`.
pub fn time_update(
    state: &FilterState,
    cfg: &FilterConfig,
    u: &Vector,
    t: f64,
    dt: f64,
) -> Result<Prior, FilterError> {
    let step = state.step_index + 1;
    let n = cfg.state_dim();
    let track = cfg.tracks_sensitivities();
    let model = cfg.model.as_ref();
    let c = &cfg.c_ref;

    let l = factor(&state.p, step, "posterior")?;
    let points = generate_cubature_points(&state.x_hat, &l);
    let point_sens: Vec<Vec<Vector>> = if track {
        state
            .sens_p
            .iter()
            .zip(&state.sens)
            .map(|(dp, s)| Ok(generate_point_sensitivities(&factor_sensitivity(&l, dp, step, "posterior")?, s)))
            .collect::<Result<_, FilterError>>()?
    } else {
        Vec::new()
    };

    let model_err = |source| FilterError::Model { step, source };
    let mut propagated = Vec::with_capacity(points.len());
    let mut propagated_sens = vec![Vec::with_capacity(points.len()); point_sens.len()];
    for (j, chi) in points.iter().enumerate() {
        if track {
            let flow = match cfg.jacobian_mode {
                JacobianMode::Analytic => rk4_step_with_tangent(model, chi, c, u, t, dt),
                JacobianMode::FiniteDifference => rk4_step_fd_tangent(model, chi, c, u, t, dt),
            }
            .map_err(model_err)?;
            for (i, ps) in point_sens.iter().enumerate() {
                propagated_sens[i].push(&flow.phi_x * &ps[j] + flow.phi_c.column(i));
            }
            propagated.push(flow.x_next);
        } else {
            propagated.push(rk4_step(model, chi, c, u, t, dt).map_err(model_err)?);
        }
    }

    let x_hat = mean(&propagated);
    let mut p = cross_covariance(&propagated, &x_hat, &propagated, &x_hat) + &cfg.noise.q;
    if cfg.process_jitter != 0.0 {
        for d in 0..n {
            p[(d, d)] += cfg.process_jitter;
        }
    }
    let p = linalg::symmetrize(&p);

    let (sens, sens_p) = if track {
        let sens: Vec<Vector> = propagated_sens.iter().map(|ps| mean(ps)).collect();
        let sens_p = propagated_sens
            .iter()
            .zip(&sens)
            .map(|(ps, s)| {
                linalg::symmetrize(&cross_covariance_derivative(
                    &propagated,
                    &x_hat,
                    ps,
                    s,
                    &propagated,
                    &x_hat,
                    ps,
                    s,
                ))
            })
            .collect();
        (sens, sens_p)
    } else {
        (state.sens.clone(), state.sens_p.clone())
    };

    Ok(Prior {
        x_hat,
        p,
        sens,
        sens_p,
        propagated: CubatureSet { points: propagated, point_sens: propagated_sens },
        step_index: step,
    })
}

/// Redraws cubature points from the prior and evaluates the predicted
/// measurement moments together with their sensitivities.
pub fn measurement_intermediates(
    prior: &Prior,
    cfg: &FilterConfig,
    u: &Vector,
) -> Result<MeasurementUpdateIntermediates, FilterError> {
    let step = prior.step_index;
    let track = cfg.tracks_sensitivities();
    let model = cfg.model.as_ref();
    let c = &cfg.c_ref;
    let m = model.meas_dim();

    let l = factor(&prior.p, step, "prior")?;
    let points = generate_cubature_points(&prior.x_hat, &l);
    let z_points: Vec<Vector> = points.iter().map(|chi| model.measure(chi, c, u)).collect();
    if z_points.iter().any(|z| z.len() != m || z.iter().any(|v| !v.is_finite())) {
        return Err(FilterError::Model { step, source: crate::models::ModelError::NonFiniteState { stage: 0 } });
    }
    let z_hat = mean(&z_points);
    let pzz = linalg::symmetrize(&(cross_covariance(&z_points, &z_hat, &z_points, &z_hat) + &cfg.noise.r));
    let pxz = cross_covariance(&points, &prior.x_hat, &z_points, &z_hat);

    let mut point_sens = Vec::new();
    let mut gamma = Vec::new();
    let mut d_pzz = Vec::new();
    let mut d_pxz = Vec::new();
    if track {
        let jacobians: Vec<(Matrix, Matrix)> =
            points.iter().map(|chi| measurement_jacobians(model, cfg.jacobian_mode, chi, c, u)).collect();
        for (i, (dp, s)) in prior.sens_p.iter().zip(&prior.sens).enumerate() {
            let dl = factor_sensitivity(&l, dp, step, "prior")?;
            let dchi = generate_point_sensitivities(&dl, s);
            let dz: Vec<Vector> =
                dchi.iter().zip(&jacobians).map(|(d, (hx, hc))| hx * d + hc.column(i)).collect();
            let g = mean(&dz);
            d_pzz.push(linalg::symmetrize(&cross_covariance_derivative(
                &z_points, &z_hat, &dz, &g, &z_points, &z_hat, &dz, &g,
            )));
            d_pxz.push(cross_covariance_derivative(&points, &prior.x_hat, &dchi, s, &z_points, &z_hat, &dz, &g));
            gamma.push(g);
            point_sens.push(dchi);
        }
    }

    Ok(MeasurementUpdateIntermediates {
        z_hat,
        pzz,
        pxz,
        gamma,
        d_pzz,
        d_pxz,
        redrawn: CubatureSet { points, point_sens },
    })
}

/// Gain for the configured mode: `Pxz·Pzz⁻¹` (CKF) or the solution of the
/// desensitized gain equation (DCKF).
pub fn compute_gain(
    prior: &Prior,
    mi: &MeasurementUpdateIntermediates,
    cfg: &FilterConfig,
) -> Result<Matrix, FilterError> {
    let step = prior.step_index;
    // A degenerate innovation covariance aborts the run in both modes.
    factor(&mi.pzz, step, "innovation")?;
    let result = match cfg.mode {
        FilterMode::Ckf => linalg::kalman_gain(&mi.pzz, &mi.pxz),
        FilterMode::Dckf => {
            linalg::solve_desensitized_gain(&mi.pzz, &mi.pxz, cfg.gain_weights(), &prior.sens, &mi.gamma)
        }
    };
    result.map_err(|source| match source {
        LinalgError::NotPositiveDefinite { .. } => FilterError::NotPositiveDefinite { step, stage: "innovation", source },
        other => FilterError::SingularSystem { step, source: other },
    })
}

/// Posterior update with an explicit gain `K`. Sensitivities are updated
/// with `K` held fixed.
pub fn apply_gain(
    prior: &Prior,
    mi: &MeasurementUpdateIntermediates,
    z: &Vector,
    gain: &Matrix,
    cfg: &FilterConfig,
) -> FilterState {
    let k = gain;
    let kt = k.transpose();
    let innovation = z - &mi.z_hat;
    let x_hat = &prior.x_hat + k * &innovation;
    let p = linalg::symmetrize(&(&prior.p - &mi.pxz * &kt - k * mi.pxz.transpose() + k * &mi.pzz * &kt));

    let (sens, sens_p) = if cfg.tracks_sensitivities() {
        let sens = prior.sens.iter().zip(&mi.gamma).map(|(s, g)| s - k * g).collect();
        let sens_p = prior
            .sens_p
            .iter()
            .zip(mi.d_pxz.iter().zip(&mi.d_pzz))
            .map(|(dp, (dxz, dzz))| linalg::symmetrize(&(dp - dxz * &kt - k * dxz.transpose() + k * dzz * &kt)))
            .collect();
        (sens, sens_p)
    } else {
        (prior.sens.clone(), prior.sens_p.clone())
    };

    let cost = desensitized_cost(&p, &sens, cfg.gain_weights());
    FilterState {
        x_hat,
        p,
        sens,
        sens_p,
        step_index: prior.step_index,
        diagnostics: Some(StepDiagnostics { gain: k.clone(), innovation, cost }),
    }
}

/// Measurement update for the configured mode.
pub fn measurement_update(prior: &Prior, z: &Vector, cfg: &FilterConfig, u: &Vector) -> Result<FilterState, FilterError> {
    let mi = measurement_intermediates(prior, cfg, u)?;
    let gain = compute_gain(prior, &mi, cfg)?;
    Ok(apply_gain(prior, &mi, z, &gain, cfg))
}

/// One full filter cycle: time update over `[t, t + dt]` followed by the
/// measurement update with `z` taken at `t + dt`.
pub fn dckf_step(
    state: &FilterState,
    cfg: &FilterConfig,
    z: &Vector,
    u: &Vector,
    t: f64,
    dt: f64,
) -> Result<FilterState, FilterError> {
    let prior = time_update(state, cfg, u, t, dt)?;
    measurement_update(&prior, z, cfg, u)
}

/// Like [`dckf_step`] but with a caller-supplied gain. With the gain sequence
/// frozen, the filter output is exactly the map whose parameter derivative
/// the sensitivity recursion computes.
pub fn step_with_gain(
    state: &FilterState,
    cfg: &FilterConfig,
    z: &Vector,
    u: &Vector,
    t: f64,
    dt: f64,
    gain: &Matrix,
) -> Result<FilterState, FilterError> {
    let prior = time_update(state, cfg, u, t, dt)?;
    let mi = measurement_intermediates(&prior, cfg, u)?;
    Ok(apply_gain(&prior, &mi, z, gain, cfg))
}
