//! Artifact files: per-filter time series, the summary table and run
//! metadata.
//!
//! CSV files use CRLF line endings and print every number with 17
//! significant digits, so a value read back is bit-identical to the one
//! written. JSON files carry the same columns and rows.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::harness::{summarize, FilterArtifacts, ModelId, RunArtifacts, ScenarioConfig};
use crate::linalg::CHOLESKY_PIVOT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Where the effective seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Flag,
    Environment,
    Config,
}

/// A rectangular table with named columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Formats `v` with 17 significant digits.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn series(artifacts: &RunArtifacts, value_columns: Vec<String>, values: impl Fn(usize) -> Vec<f64>) -> Table {
    let mut columns = vec!["step".to_string(), "time_s".to_string()];
    columns.extend(value_columns);
    let rows = (0..artifacts.steps)
        .map(|k| {
            let mut row = vec![(k + 1) as f64, (k + 1) as f64 * artifacts.dt];
            row.extend(values(k));
            row
        })
        .collect();
    Table { columns, rows }
}

fn state_columns(n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("x{j}")).collect()
}

/// The five time-series tables for one filter, keyed by file stem.
pub fn filter_tables(artifacts: &RunArtifacts, filter: &FilterArtifacts) -> Vec<(String, Table)> {
    let n = artifacts.state_dim;
    let agg = &filter.aggregates;
    let name = filter.kind.name();
    let sens_columns = (1..=artifacts.param_dim)
        .flat_map(|i| (1..=n).map(move |j| format!("x{j}_c{i}")))
        .collect();
    let nme = match &agg.nme {
        Some(nme) => series(artifacts, state_columns(n), |k| nme[k].clone()),
        // Fewer than two completed runs: header only.
        None => Table { columns: series(artifacts, state_columns(n), |_| vec![]).columns, rows: vec![] },
    };
    vec![
        (format!("rmse_{name}"), series(artifacts, state_columns(n), |k| agg.rmse[k].clone())),
        (format!("sensitivity_{name}"), series(artifacts, sens_columns, |k| agg.mean_abs_sens[k].clone())),
        (format!("cost_{name}"), series(artifacts, vec!["mean_cost".into()], |k| vec![agg.mean_cost[k]])),
        (format!("nme_{name}"), nme),
        (format!("gain_{name}"), series(artifacts, vec!["mean_gain_norm".into()], |k| vec![agg.mean_gain_norm[k]])),
    ]
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(fs::File::create(path)?))
}

fn write_table(dir: &Path, stem: &str, table: &Table, format: Format) -> io::Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => {
            let mut w = csv_writer(&path)?;
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|v| format_number(*v)))?;
            }
            w.flush()?;
        }
        Format::Json => write_json(&path, table)?,
    }
    Ok(path)
}

fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Tunables and modelling choices in force for a run, recorded so that the
/// metadata file alone explains every number.
pub fn defaults_in_force(config: &ScenarioConfig) -> serde_json::Value {
    let assumptions: &[&str] = match config.model {
        ModelId::Helicopter => &[
            "second parameter drawn from U(0.05, 0.15) unless param_bounds says otherwise",
            "measurement noise R = 0.01 I and process noise Q = 0 unless r and q say otherwise",
            "gravity constant 0.322 used as given, in the model's own units",
        ],
        ModelId::FallingBody => &["process noise Q = 0 exactly; process_jitter is the only regularization"],
    };
    json!({
        "assumptions": assumptions,
        "rng": "ChaCha20, seeded from the run seed, one stream per Monte Carlo run",
        "parameter_distribution": "independent uniform over param_bounds",
        "truth_integrator": "classical RK4 on the filter grid",
        "process_jitter": config.process_jitter,
        "nme_threshold": config.nme_threshold,
        "jacobian_mode": config.jacobian_mode,
        "cholesky_pivot_tolerance": CHOLESKY_PIVOT_TOL,
        "perfect_ckf_cost": "trace of the posterior covariance",
        "reference_filter_cost": "trace of the posterior covariance plus weighted sensitivity norms",
        "sensitivity_gain_derivative": "gain treated as independent of the parameters",
        "diverged_runs": "excluded from aggregates and counted",
        "nme_with_fewer_than_two_runs": "not computed, nme file has a header only",
    })
}

/// Builds the metadata document.
pub fn metadata(artifacts: &RunArtifacts, seed_source: SeedSource, format: Format) -> serde_json::Value {
    let divergences: serde_json::Map<String, serde_json::Value> = artifacts
        .filters
        .iter()
        .map(|f| (f.kind.name().to_string(), json!(f.divergences.len())))
        .collect();
    let details: Vec<_> = artifacts
        .filters
        .iter()
        .flat_map(|f| {
            f.divergences
                .iter()
                .map(move |d| json!({"filter": f.kind.name(), "run": d.run, "step": d.step, "message": d.message}))
        })
        .collect();
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": artifacts.scenario.seed,
        "seed_source": seed_source,
        "format": format,
        "steps": artifacts.steps,
        "config": artifacts.scenario,
        "divergences": divergences,
        "divergence_details": details,
        "defaults": defaults_in_force(&artifacts.scenario),
    })
}

/// Writes every artifact into `dir` (created if missing) and returns the
/// paths in write order.
pub fn write_artifacts(
    artifacts: &RunArtifacts,
    dir: &Path,
    format: Format,
    seed_source: SeedSource,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for filter in &artifacts.filters {
        for (stem, table) in filter_tables(artifacts, filter) {
            written.push(write_table(dir, &stem, &table, format)?);
        }
    }

    let summary = summarize(artifacts);
    let summary_path = dir.join(format!("summary.{}", format.extension()));
    match format {
        Format::Csv => {
            let mut w = csv_writer(&summary_path)?;
            w.write_record(["filter", "component", "metric", "value"])?;
            for r in &summary.rows {
                w.write_record([r.filter.as_str(), r.component.as_str(), r.metric.as_str(), &format_number(r.value)])?;
            }
            w.flush()?;
        }
        Format::Json => write_json(&summary_path, &summary)?,
    }
    written.push(summary_path);

    let meta_path = dir.join("metadata.json");
    write_json(&meta_path, &metadata(artifacts, seed_source, format))?;
    written.push(meta_path);
    Ok(written)
}
