//! Falling-body benchmark: perfect CKF, imperfect CKF and DCKF over a
//! Monte Carlo batch, with the artifacts written to disk.
//!
//! ```text
//! cargo run --release --example falling_body -- [runs] [output-dir]
//! ```

use std::path::PathBuf;

use desens_ckf::cli::{write_artifacts, Format, SeedSource};
use desens_ckf::harness::{run_scenario, summarize, FilterKind, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut config = ScenarioConfig::falling_body();
    config.mc_runs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(100);
    let out: PathBuf = args.next().unwrap_or_else(|| "out/falling-body".into()).into();

    let artifacts = run_scenario(&config)?;
    let summary = summarize(&artifacts);

    println!("{} runs, {} steps of {} s", config.mc_runs, artifacts.steps, config.dt);
    println!("{:<14} {:>12} {:>12} {:>12} {:>12}", "filter", "rmse x1", "rmse x2", "|s| x1", "|s| x2");
    for kind in FilterKind::ALL {
        let get = |c: &str, m: &str| summary.get(kind, c, m).unwrap_or(f64::NAN);
        println!(
            "{:<14} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            kind.name(),
            get("x1", "rmse"),
            get("x2", "rmse"),
            get("x1/c1", "mean_abs_sensitivity"),
            get("x2/c1", "mean_abs_sensitivity"),
        );
    }

    let written = write_artifacts(&artifacts, &out, Format::Csv, SeedSource::Config)?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}
