//! Normalized mean error per step for each filter on the helicopter
//! scenario, printed as a coarse time series.

use desens_ckf::harness::{run_scenario, FilterKind, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ScenarioConfig::helicopter();
    config.mc_runs = 100;
    let artifacts = run_scenario(&config)?;
    let threshold = config.nme_threshold;

    println!("NME of x1 (threshold {threshold})");
    println!("{:>6} {:>13} {:>13} {:>13}", "t [s]", "perfect-ckf", "imperfect-ckf", "dckf");
    let series = |kind| artifacts.filter(kind).and_then(|f| f.aggregates.nme.clone()).unwrap_or_default();
    let (p, i, d) = (series(FilterKind::PerfectCkf), series(FilterKind::ImperfectCkf), series(FilterKind::Dckf));
    for k in (0..artifacts.steps).step_by(8) {
        println!("{:>6.2} {:>13.3} {:>13.3} {:>13.3}", (k + 1) as f64 * config.dt, p[k][0], i[k][0], d[k][0]);
    }
    Ok(())
}
