//! Checks the propagated sensitivities `∂x̂⁺/∂c` of a DCKF against central
//! differences of the same filter with its gain sequence frozen.

use desens_ckf::filter::{dckf_step, step_with_gain, FilterState};
use desens_ckf::harness::{filter_config, simulate_truth, FilterKind, ScenarioConfig};
use desens_ckf::{Matrix, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = ScenarioConfig::helicopter().resolve()?;
    let truth = simulate_truth(&scenario, 0)?;
    let cfg = filter_config(&scenario, FilterKind::Dckf, &truth.c_true);
    let (dt, u, steps) = (scenario.config.dt, Vector::zeros(0), 25);
    let start = FilterState::new(scenario.x0_hat.clone(), scenario.p0.clone(), cfg.param_dim());

    let mut state = start.clone();
    let mut nominal = Vec::new();
    for k in 0..steps {
        state = dckf_step(&state, &cfg, &truth.measurements[k], &u, k as f64 * dt, dt)?;
        nominal.push(state.clone());
    }
    let gains: Vec<Matrix> = nominal.iter().map(|s| s.diagnostics.as_ref().unwrap().gain.clone()).collect();

    let replay = |c: &Vector| -> Result<Vec<Vector>, Box<dyn std::error::Error>> {
        let mut perturbed = cfg.clone();
        perturbed.c_ref = c.clone();
        let mut s = start.clone();
        let mut xs = Vec::new();
        for (k, gain) in gains.iter().enumerate() {
            s = step_with_gain(&s, &perturbed, &truth.measurements[k], &u, k as f64 * dt, dt, gain)?;
            xs.push(s.x_hat.clone());
        }
        Ok(xs)
    };

    for i in 0..cfg.param_dim() {
        let h = 1e-5;
        let (mut plus, mut minus) = (cfg.c_ref.clone(), cfg.c_ref.clone());
        plus[i] += h;
        minus[i] -= h;
        let (xp, xm) = (replay(&plus)?, replay(&minus)?);
        println!("parameter c{}", i + 1);
        for k in [0, 4, 9, 24] {
            let fd = (&xp[k] - &xm[k]) / (2.0 * h);
            let s = &nominal[k].sens[i];
            println!("  step {:>2}: |s| = {:.6e}, relative error {:.2e}", k + 1, s.norm(), (s - &fd).norm() / fd.norm());
        }
    }
    Ok(())
}
