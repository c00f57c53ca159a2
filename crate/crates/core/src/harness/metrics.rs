//! Monte Carlo aggregates: RMSE, mean sensitivities and cost, and the
//! normalized mean error (NME) consistency statistic.

use serde::Serialize;

use super::scenario::FilterKind;
use super::HarnessError;
use crate::linalg::{Matrix, Vector};

/// Per-step log of one filter over one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    /// Estimation error `x̂⁺ − x` per step.
    pub errors: Vec<Vector>,
    /// `sᵢ⁺` per step, per parameter.
    pub sens: Vec<Vec<Vector>>,
    pub cost: Vec<f64>,
    /// Frobenius norm of the gain per step.
    pub gain_norm: Vec<f64>,
    pub covariances: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(RunLog),
    Diverged { step: usize, message: String },
}

impl RunOutcome {
    pub fn log(&self) -> Option<&RunLog> {
        match self {
            RunOutcome::Completed(log) => Some(log),
            RunOutcome::Diverged { .. } => None,
        }
    }
}

/// Across-run aggregates, indexed `[step][component]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub rmse: Vec<Vec<f64>>,
    /// Mean `|sᵢ⁺|` per state; component index `i·n + j` for parameter `i`,
    /// state `j`.
    pub mean_abs_sens: Vec<Vec<f64>>,
    pub mean_cost: Vec<f64>,
    pub mean_gain_norm: Vec<f64>,
    /// `None` when fewer than two runs completed.
    pub nme: Option<Vec<Vec<f64>>>,
    pub completed_runs: usize,
}

/// Computes every aggregate over `logs`, reduced in the given order.
pub fn aggregate(logs: &[&RunLog], state_dim: usize, param_dim: usize) -> Result<Aggregates, HarnessError> {
    let runs = logs.len();
    let steps = logs.first().map_or(0, |l| l.errors.len());
    let n = state_dim;
    let mut sum_sq = vec![vec![0.0; n]; steps];
    let mut sum_abs_sens = vec![vec![0.0; n * param_dim]; steps];
    let mut sum_cost = vec![0.0; steps];
    let mut sum_gain = vec![0.0; steps];
    for log in logs {
        for k in 0..steps {
            for j in 0..n {
                sum_sq[k][j] += log.errors[k][j] * log.errors[k][j];
            }
            for (i, s) in log.sens[k].iter().enumerate() {
                for j in 0..n {
                    sum_abs_sens[k][i * n + j] += s[j].abs();
                }
            }
            sum_cost[k] += log.cost[k];
            sum_gain[k] += log.gain_norm[k];
        }
    }
    let inv = 1.0 / runs.max(1) as f64;
    let rmse = sum_sq.into_iter().map(|row| row.into_iter().map(|v| (v * inv).sqrt()).collect()).collect();
    let mean_abs_sens = sum_abs_sens.into_iter().map(|row| row.into_iter().map(|v| v * inv).collect()).collect();
    let nme = if runs >= 2 {
        let errors: Vec<&[Vector]> = logs.iter().map(|l| l.errors.as_slice()).collect();
        let covs: Vec<&[Matrix]> = logs.iter().map(|l| l.covariances.as_slice()).collect();
        Some(nme_statistic(&errors, &covs)?)
    } else {
        None
    };
    Ok(Aggregates {
        rmse,
        mean_abs_sens,
        mean_cost: sum_cost.into_iter().map(|v| v * inv).collect(),
        mean_gain_norm: sum_gain.into_iter().map(|v| v * inv).collect(),
        nme,
        completed_runs: runs,
    })
}

/// Normalized mean error per step and state:
///
/// ```text
/// NME_j(k) = |(1/M)·Σ_r x̃_{j,k,r}| / √(P̄_jj(k) / M)
/// ```
///
/// where `P̄` is the across-run mean of the filter covariances. Values above
/// the two-sided normal quantile (1.96 at 95 %) flag an inconsistent filter.
pub fn nme_statistic(errors: &[&[Vector]], covariances: &[&[Matrix]]) -> Result<Vec<Vec<f64>>, HarnessError> {
    let runs = errors.len();
    if runs < 2 || covariances.len() != runs {
        return Err(HarnessError::TooFewRuns(runs));
    }
    let steps = errors[0].len();
    let n = errors[0].first().map_or(0, |e| e.len());
    let m = runs as f64;
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mean_err = errors.iter().map(|e| e[k][j]).sum::<f64>() / m;
            let mean_var = covariances.iter().map(|p| p[k][(j, j)]).sum::<f64>() / m;
            if !(mean_var > 0.0) {
                return Err(HarnessError::DegenerateCovariance { step: k + 1, state: j });
            }
            row.push(mean_err.abs() / (mean_var / m).sqrt());
        }
        out.push(row);
    }
    Ok(out)
}

/// One `(filter, component, metric) → value` entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub filter: String,
    pub component: String,
    pub metric: String,
    pub value: f64,
}

/// Flattened per-filter scalars, in deterministic order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn get(&self, filter: FilterKind, component: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.filter == filter.name() && r.component == component && r.metric == metric)
            .map(|r| r.value)
    }
}

fn time_average(series: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = series.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Flattens the aggregates of each filter into time-averaged scalars:
/// RMSE and mean `|s|` per state, mean cost, mean gain norm, the fraction of
/// steps whose NME exceeds the threshold, and the divergence count.
pub fn summarize(artifacts: &super::RunArtifacts) -> Summary {
    let n = artifacts.state_dim;
    let threshold = artifacts.scenario.nme_threshold;
    let mut rows = Vec::new();
    for fa in &artifacts.filters {
        let agg = &fa.aggregates;
        let mut push = |component: String, metric: &str, value: f64| {
            rows.push(SummaryRow { filter: fa.kind.name().into(), component, metric: metric.into(), value })
        };
        for j in 0..n {
            push(format!("x{}", j + 1), "rmse", time_average(agg.rmse.iter().map(|r| r[j])));
        }
        for i in 0..artifacts.param_dim {
            for j in 0..n {
                push(
                    format!("x{}/c{}", j + 1, i + 1),
                    "mean_abs_sensitivity",
                    time_average(agg.mean_abs_sens.iter().map(|r| r[i * n + j])),
                );
            }
        }
        push("all".into(), "mean_cost", time_average(agg.mean_cost.iter().copied()));
        push("all".into(), "mean_gain_norm", time_average(agg.mean_gain_norm.iter().copied()));
        if let Some(nme) = &agg.nme {
            for j in 0..n {
                let above = time_average(nme.iter().map(|r| if r[j] > threshold { 1.0 } else { 0.0 }));
                push(format!("x{}", j + 1), "nme_violation_fraction", above);
            }
        }
        push("all".into(), "diverged_runs", fa.divergences.len() as f64);
    }
    Summary { rows }
}
