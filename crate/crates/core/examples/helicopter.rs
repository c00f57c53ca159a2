//! Helicopter benchmark with a linear closed-loop model and two uncertain
//! aerodynamic derivatives. Prints the cost, RMSE and NME comparison.
//!
//! ```text
//! cargo run --release --example helicopter -- [runs]
//! ```

use desens_ckf::harness::{run_scenario, summarize, FilterKind, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ScenarioConfig::helicopter();
    config.mc_runs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let artifacts = run_scenario(&config)?;
    let summary = summarize(&artifacts);

    println!("{:<14} {:>11} {:>11} {:>11} {:>11} {:>11} {:>9}", "filter", "mean cost", "rmse x1", "rmse x2", "rmse x3", "rmse x4", "nme>1.96");
    for kind in FilterKind::ALL {
        let get = |c: &str, m: &str| summary.get(kind, c, m).unwrap_or(f64::NAN);
        let worst_nme = (1..=4).map(|j| get(&format!("x{j}"), "nme_violation_fraction")).fold(0.0, f64::max);
        println!(
            "{:<14} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>8.1}%",
            kind.name(),
            get("all", "mean_cost"),
            get("x1", "rmse"),
            get("x2", "rmse"),
            get("x3", "rmse"),
            get("x4", "rmse"),
            100.0 * worst_nme,
        );
    }
    Ok(())
}
