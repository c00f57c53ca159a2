//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the filter recursion it checks: the Kalman
//! filter, the gain cost and the random instances are written out from
//! their textbook definitions.

#![allow(dead_code)]

use std::sync::Arc;

use desens_ckf::filter::{
    apply_gain, compute_gain, measurement_intermediates, step_with_gain, time_update, FilterConfig, FilterMode,
    FilterState,
};
use desens_ckf::harness::{filter_config, simulate_truth, FilterKind, Scenario, ScenarioConfig, Trajectory};
use desens_ckf::models::{LinearModel, NoiseSpec};
use desens_ckf::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `A·Aᵀ + δ·I` with `A` standard normal; eigenvalues bounded below by `δ`.
pub fn random_spd(rng: &mut impl Rng, n: usize, delta: f64) -> Matrix {
    let a = gaussian(rng, n, n);
    &a * a.transpose() + Matrix::identity(n, n) * delta
}

pub fn random_sym(rng: &mut impl Rng, n: usize) -> Matrix {
    let a = gaussian(rng, n, n);
    (&a + a.transpose()) * 0.5
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn rel_vec(a: &Vector, b: &Vector, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

/// Textbook discrete Kalman filter step output.
#[derive(Debug, Clone)]
pub struct KfStep {
    pub x: Vector,
    pub p: Matrix,
    pub k: Matrix,
}

/// Linear Kalman filter `x⁻ = F·x`, `P⁻ = F·P·Fᵀ + Q`,
/// `K = P⁻Hᵀ(HP⁻Hᵀ + R)⁻¹`, Joseph-form covariance update.
pub fn kalman_filter(f: &Matrix, q: &Matrix, h: &Matrix, r: &Matrix, x0: &Vector, p0: &Matrix, zs: &[Vector]) -> Vec<KfStep> {
    let n = x0.len();
    let mut x = x0.clone();
    let mut p = p0.clone();
    let mut out = Vec::with_capacity(zs.len());
    for z in zs {
        let xm = f * &x;
        let pm = f * &p * f.transpose() + q;
        let s = h * &pm * h.transpose() + r;
        let k = &pm * h.transpose() * s.try_inverse().expect("innovation covariance invertible");
        x = &xm + &k * (z - h * &xm);
        let a = Matrix::identity(n, n) - &k * h;
        p = &a * &pm * a.transpose() + &k * r * k.transpose();
        out.push(KfStep { x: x.clone(), p: p.clone(), k });
    }
    out
}

/// Desensitized cost of a candidate gain, expanded directly:
/// `Tr(P⁻ − Pxz·Kᵀ − K·Pxzᵀ + K·Pzz·Kᵀ) + Σᵢ (sᵢ⁻ − Kγᵢ)ᵀWᵢ(sᵢ⁻ − Kγᵢ)`.
pub fn gain_cost(k: &Matrix, p_minus: &Matrix, pxz: &Matrix, pzz: &Matrix, w: &[Matrix], s: &[Vector], g: &[Vector]) -> f64 {
    let p = p_minus - pxz * k.transpose() - k * pxz.transpose() + k * pzz * k.transpose();
    let mut j = p.trace();
    for ((wi, si), gi) in w.iter().zip(s).zip(g) {
        let e = si - k * gi;
        j += e.dot(&(wi * &e));
    }
    j
}

/// Two-state damped oscillator with one stiffness parameter and a position
/// sensor.
pub fn oscillator() -> LinearModel {
    LinearModel::new(
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.2]),
        vec![Matrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 0.0])],
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
}

/// Filter configuration for the oscillator.
pub fn oscillator_config(mode: FilterMode, c: f64, q: f64, r: f64) -> FilterConfig {
    let noise = NoiseSpec::new(Matrix::identity(2, 2) * q, Matrix::from_element(1, 1, r)).unwrap();
    FilterConfig::new(
        Arc::new(oscillator()),
        noise,
        Vector::from_element(1, c),
        vec![Matrix::from_diagonal(&Vector::from_row_slice(&[0.5, 0.2]))],
        mode,
    )
    .unwrap()
}

/// Built-in scenario with `runs` Monte Carlo runs, its resolved form and the
/// truth of run `run`.
pub fn scenario_truth(config: ScenarioConfig, run: usize) -> (Scenario, Trajectory) {
    let scenario = config.resolve().unwrap();
    let truth = simulate_truth(&scenario, run).unwrap();
    (scenario, truth)
}

pub fn initial_state(scenario: &Scenario) -> FilterState {
    FilterState::new(scenario.x0_hat.clone(), scenario.p0.clone(), scenario.model.param_dim())
}

/// Runs `cfg` over the first `steps` measurements and returns every
/// posterior.
pub fn run_filter(scenario: &Scenario, cfg: &FilterConfig, truth: &Trajectory, steps: usize) -> Vec<FilterState> {
    let u = Vector::zeros(0);
    let dt = scenario.config.dt;
    let mut state = initial_state(scenario);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let prior = time_update(&state, cfg, &u, k as f64 * dt, dt).unwrap();
        let mi = measurement_intermediates(&prior, cfg, &u).unwrap();
        let gain = compute_gain(&prior, &mi, cfg).unwrap();
        state = apply_gain(&prior, &mi, &truth.measurements[k], &gain, cfg);
        out.push(state.clone());
    }
    out
}

/// Replays the filter with `c_ref` replaced by `c` and the gains frozen at
/// their nominal values.
pub fn frozen_gain_replay(
    scenario: &Scenario,
    cfg: &FilterConfig,
    truth: &Trajectory,
    gains: &[Matrix],
    c: &Vector,
) -> Vec<Vector> {
    let mut cfg = cfg.clone();
    cfg.c_ref = c.clone();
    let u = Vector::zeros(0);
    let dt = scenario.config.dt;
    let mut state = initial_state(scenario);
    gains
        .iter()
        .enumerate()
        .map(|(k, gain)| {
            state = step_with_gain(&state, &cfg, &truth.measurements[k], &u, k as f64 * dt, dt, gain).unwrap();
            state.x_hat.clone()
        })
        .collect()
}

/// Worst relative error between propagated `sᵢ⁺` and a central difference
/// of the frozen-gain filter, over `steps` steps and every parameter.
pub fn sensitivity_fd_error(config: ScenarioConfig, kind: FilterKind, steps: usize, rel_step: f64) -> f64 {
    let (scenario, truth) = scenario_truth(config, 0);
    let cfg = filter_config(&scenario, kind, &truth.c_true);
    let nominal = run_filter(&scenario, &cfg, &truth, steps);
    let gains: Vec<Matrix> = nominal.iter().map(|s| s.diagnostics.as_ref().unwrap().gain.clone()).collect();
    let mut worst: f64 = 0.0;
    for i in 0..cfg.param_dim() {
        let h = rel_step * cfg.c_ref[i].abs().max(1e-3);
        let mut plus = cfg.c_ref.clone();
        plus[i] += h;
        let mut minus = cfg.c_ref.clone();
        minus[i] -= h;
        let xp = frozen_gain_replay(&scenario, &cfg, &truth, &gains, &plus);
        let xm = frozen_gain_replay(&scenario, &cfg, &truth, &gains, &minus);
        for k in 0..steps {
            let fd = (&xp[k] - &xm[k]) / (2.0 * h);
            let s = &nominal[k].sens[i];
            // Components are compared on the scale of the largest one so a
            // near-zero entry does not dominate.
            let err = rel_vec(s, &fd, 1e-12);
            worst = worst.max(err);
        }
    }
    worst
}
