//! Monte Carlo benchmark engine.
//!
//! For every run the harness draws the true parameters, integrates the true
//! trajectory on the filter grid, synthesizes noisy measurements, and runs
//! each configured filter on the same measurement record:
//!
//! - the perfect CKF is given the true parameters;
//! - the imperfect CKF and the DCKF are given the reference parameters.
//!
//! Each run draws from its own ChaCha stream (`seed`, run index), so results
//! do not depend on worker count or completion order. A filter that fails
//! mid-run is recorded as diverged for that run and left out of the
//! aggregates.

mod metrics;
mod scenario;

pub use metrics::{aggregate, nme_statistic, summarize, Aggregates, RunLog, RunOutcome, Summary, SummaryRow};
pub use scenario::{
    builtin_scenarios, ConfigError, FilterKind, ModelId, Scenario, ScenarioConfig, DEFAULT_NME_THRESHOLD,
    SCHEMA_VERSION,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::filter::{dckf_step, desensitized_cost, FilterConfig, FilterMode, FilterState};
use crate::linalg::{Matrix, Vector};
use crate::models::rk4_step;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("every run of {filter} diverged (first: run {run}, {message})")]
    AllRunsDiverged { filter: FilterKind, run: usize, message: String },
    #[error("mean covariance of state {state} is not positive at step {step}")]
    DegenerateCovariance { step: usize, state: usize },
    #[error("the NME statistic needs at least two runs, got {0}")]
    TooFewRuns(usize),
    #[error("truth simulation failed in run {run}: {message}")]
    Truth { run: usize, message: String },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub run: usize,
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterArtifacts {
    pub kind: FilterKind,
    pub runs: Vec<RunOutcome>,
    pub divergences: Vec<Divergence>,
    pub aggregates: Aggregates,
}

impl FilterArtifacts {
    /// Aggregates the completed runs in run-index order.
    pub fn from_runs(
        kind: FilterKind,
        runs: Vec<RunOutcome>,
        state_dim: usize,
        param_dim: usize,
    ) -> Result<Self, HarnessError> {
        let divergences: Vec<Divergence> = runs
            .iter()
            .enumerate()
            .filter_map(|(run, o)| match o {
                RunOutcome::Diverged { step, message } => Some(Divergence { run, step: *step, message: message.clone() }),
                RunOutcome::Completed(_) => None,
            })
            .collect();
        let logs: Vec<&RunLog> = runs.iter().filter_map(RunOutcome::log).collect();
        if logs.is_empty() {
            let first = &divergences[0];
            return Err(HarnessError::AllRunsDiverged { filter: kind, run: first.run, message: first.message.clone() });
        }
        let aggregates = aggregate(&logs, state_dim, param_dim)?;
        Ok(Self { kind, runs, divergences, aggregates })
    }
}

/// Everything produced by one scenario execution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub scenario: ScenarioConfig,
    pub steps: usize,
    pub dt: f64,
    pub state_dim: usize,
    pub param_dim: usize,
    /// True parameters drawn for each run.
    pub c_true: Vec<Vec<f64>>,
    pub filters: Vec<FilterArtifacts>,
}

impl RunArtifacts {
    pub fn filter(&self, kind: FilterKind) -> Option<&FilterArtifacts> {
        self.filters.iter().find(|f| f.kind == kind)
    }
}

/// Simulated truth and measurements for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub c_true: Vector,
    /// `x_k` for `k = 0..=steps`.
    pub states: Vec<Vector>,
    /// `z_k` for `k = 1..=steps` (index 0 is `z_1`).
    pub measurements: Vec<Vector>,
}

fn run_rng(seed: u64, run: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn standard_normal(rng: &mut ChaCha20Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Symmetric square root of a positive semi-definite matrix, used to color
/// noise whose covariance may be singular.
fn psd_sqrt(m: &Matrix) -> Matrix {
    let eig = m.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Draws one uniform sample per parameter; degenerate bounds return the bound.
pub fn sample_parameters(rng: &mut impl Rng, bounds: &[[f64; 2]]) -> Vector {
    Vector::from_iterator(
        bounds.len(),
        bounds.iter().map(|&[lo, hi]| if lo == hi { lo } else { rng.random_range(lo..hi) }),
    )
}

/// Simulates the truth for run `run`. Parameters are drawn first, then
/// process noise (skipped when `Q = 0`), then measurement noise.
pub fn simulate_truth(scenario: &Scenario, run: usize) -> Result<Trajectory, HarnessError> {
    let cfg = &scenario.config;
    let mut rng = run_rng(cfg.seed, run);
    let c_true = sample_parameters(&mut rng, &cfg.param_bounds);
    let model = scenario.model.as_ref();
    let u = Vector::zeros(0);
    let n = model.state_dim();
    let m = model.meas_dim();
    let q_sqrt = (scenario.noise.q.amax() > 0.0).then(|| psd_sqrt(&scenario.noise.q));

    let mut states = Vec::with_capacity(scenario.steps + 1);
    states.push(scenario.x0_true.clone());
    for k in 0..scenario.steps {
        let t = k as f64 * cfg.dt;
        let mut next = rk4_step(model, &states[k], &c_true, &u, t, cfg.dt)
            .map_err(|e| HarnessError::Truth { run, message: e.to_string() })?;
        if let Some(qs) = &q_sqrt {
            next += qs * standard_normal(&mut rng, n);
        }
        states.push(next);
    }
    let r_sqrt = psd_sqrt(&scenario.noise.r);
    let measurements = states[1..]
        .iter()
        .map(|x| model.measure(x, &c_true, &u) + &r_sqrt * standard_normal(&mut rng, m))
        .collect();
    Ok(Trajectory { c_true, states, measurements })
}

/// Filter configuration for `kind` in this scenario and run.
pub fn filter_config(scenario: &Scenario, kind: FilterKind, c_true: &Vector) -> FilterConfig {
    let (c, mode) = match kind {
        FilterKind::PerfectCkf => (c_true.clone(), FilterMode::Ckf),
        FilterKind::ImperfectCkf => (scenario.c_ref.clone(), FilterMode::Ckf),
        FilterKind::Dckf => (scenario.c_ref.clone(), FilterMode::Dckf),
    };
    FilterConfig::new(scenario.model.clone(), scenario.noise.clone(), c, scenario.weights.clone(), mode)
        .expect("scenario was validated")
        .with_sensitivity_tracking(true)
        .with_jacobian_mode(scenario.config.jacobian_mode)
        .with_process_jitter(scenario.config.process_jitter)
}

/// Runs one filter over a simulated trajectory.
pub fn run_filter(scenario: &Scenario, kind: FilterKind, truth: &Trajectory) -> RunOutcome {
    let cfg = filter_config(scenario, kind, &truth.c_true);
    let dt = scenario.config.dt;
    let u = Vector::zeros(0);
    let steps = scenario.steps;
    let mut state = FilterState::new(scenario.x0_hat.clone(), scenario.p0.clone(), cfg.param_dim());
    let mut log = RunLog {
        errors: Vec::with_capacity(steps),
        sens: Vec::with_capacity(steps),
        cost: Vec::with_capacity(steps),
        gain_norm: Vec::with_capacity(steps),
        covariances: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        let t = k as f64 * dt;
        state = match dckf_step(&state, &cfg, &truth.measurements[k], &u, t, dt) {
            Ok(s) => s,
            Err(e) => return RunOutcome::Diverged { step: k + 1, message: e.to_string() },
        };
        if state.x_hat.iter().any(|v| !v.is_finite()) {
            return RunOutcome::Diverged { step: k + 1, message: "non-finite estimate".into() };
        }
        // The perfect filter is scored on Tr(P⁺); the others on the
        // sensitivity-weighted cost they are compared under.
        let cost = match kind {
            FilterKind::PerfectCkf => state.p.trace(),
            _ => desensitized_cost(&state.p, &state.sens, &scenario.weights),
        };
        log.errors.push(&state.x_hat - &truth.states[k + 1]);
        log.sens.push(state.sens.clone());
        log.cost.push(cost);
        log.gain_norm.push(state.diagnostics.as_ref().map_or(0.0, |d| d.gain.norm()));
        log.covariances.push(state.p.clone());
    }
    RunOutcome::Completed(log)
}

/// Executes the scenario on the global worker pool.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifacts, HarnessError> {
    run_scenario_with_jobs(cfg, None)
}

/// Executes the scenario on at most `jobs` worker threads.
pub fn run_scenario_with_jobs(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<RunArtifacts, HarnessError> {
    let scenario = cfg.resolve()?;
    let work = || -> Result<Vec<(Vector, Vec<RunOutcome>)>, HarnessError> {
        (0..cfg.mc_runs)
            .into_par_iter()
            .map(|run| {
                let truth = simulate_truth(&scenario, run)?;
                let outcomes = cfg.filters.iter().map(|&kind| run_filter(&scenario, kind, &truth)).collect();
                Ok((truth.c_true, outcomes))
            })
            .collect()
    };
    let per_run = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let n = scenario.model.state_dim();
    let l = scenario.model.param_dim();
    let mut c_true = Vec::with_capacity(per_run.len());
    let mut by_filter: Vec<Vec<RunOutcome>> = vec![Vec::with_capacity(per_run.len()); cfg.filters.len()];
    for (c, outcomes) in per_run {
        c_true.push(c.iter().copied().collect());
        for (slot, o) in by_filter.iter_mut().zip(outcomes) {
            slot.push(o);
        }
    }
    let filters = cfg
        .filters
        .iter()
        .zip(by_filter)
        .map(|(&kind, runs)| FilterArtifacts::from_runs(kind, runs, n, l))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(RunArtifacts {
        scenario: cfg.clone(),
        steps: scenario.steps,
        dt: cfg.dt,
        state_dim: n,
        param_dim: l,
        c_true,
        filters,
    })
}
