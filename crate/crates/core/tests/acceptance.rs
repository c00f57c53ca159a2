//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown
//! by `cargo test`. Exits non-zero when any criterion fails.

mod common;

use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Instant;

use common::*;
use desens_ckf::filter::{compute_gain, measurement_intermediates, time_update, FilterMode};
use desens_ckf::harness::{filter_config, run_scenario, summarize, FilterKind, ScenarioConfig, Summary};
use desens_ckf::linalg::{cholesky, gain_equation_lhs, gain_equation_rhs, sqrt_sensitivity};
use desens_ckf::{Matrix, Vector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    println!(
        "{} criterion {id}: {title}: {} [{:.1} s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
    o.pass
}

fn scenarios() -> [ScenarioConfig; 2] {
    [ScenarioConfig::falling_body(), ScenarioConfig::helicopter()]
}

/// DCKF with zero weights against CKF over every step of both scenarios.
fn reduction_identity() -> Outcome {
    let tol = 1e-12;
    let mut worst: f64 = 0.0;
    for config in scenarios() {
        let (mut scenario, truth) = scenario_truth(config, 0);
        scenario.weights.iter_mut().for_each(|w| w.fill(0.0));
        let ckf = filter_config(&scenario, FilterKind::ImperfectCkf, &truth.c_true);
        let dckf = filter_config(&scenario, FilterKind::Dckf, &truth.c_true);
        assert_eq!(dckf.mode, FilterMode::Dckf);
        let a = run_filter(&scenario, &ckf, &truth, scenario.steps);
        let b = run_filter(&scenario, &dckf, &truth, scenario.steps);
        for (sa, sb) in a.iter().zip(&b) {
            worst = worst.max(rel_vec(&sb.x_hat, &sa.x_hat, 0.0)).max(rel(&sb.p, &sa.p));
        }
    }
    Outcome { pass: worst <= tol, detail: format!("max relative difference {worst:.2e} (tol {tol:.0e})") }
}

/// CKF against the textbook Kalman filter on a linear two-state model.
fn linear_gaussian() -> Outcome {
    let tol = 1e-8;
    let (c, q, r, dt) = (0.5, 1e-3, 0.04, 0.1);
    let cfg = oscillator_config(FilterMode::Ckf, c, q, r);
    let model = oscillator();
    let f = model.rk4_transition(&cfg.c_ref, dt);
    let mut g = rng(11);
    let x0 = Vector::from_row_slice(&[1.0, -0.5]);
    let p0 = Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
    let mut x = &x0 + gaussian_vec(&mut g, 2) * 0.5;
    let zs: Vec<Vector> = (0..100)
        .map(|_| {
            x = &f * &x + gaussian_vec(&mut g, 2) * q.sqrt();
            &model.h * &x + gaussian_vec(&mut g, 1) * r.sqrt()
        })
        .collect();
    let oracle = kalman_filter(&f, &cfg.noise.q, &model.h, &cfg.noise.r, &x0, &p0, &zs);
    let mut filter = desens_ckf::CubatureFilter::new(cfg, x0, p0);
    let u = Vector::zeros(0);
    let mut worst: f64 = 0.0;
    for (k, (z, o)) in zs.iter().zip(&oracle).enumerate() {
        let s = filter.step(z, &u, k as f64 * dt, dt).unwrap();
        let gain = &s.diagnostics.as_ref().unwrap().gain;
        worst = worst.max(rel_vec(&s.x_hat, &o.x, 0.0)).max(rel(&s.p, &o.p)).max(rel(gain, &o.k));
    }
    Outcome { pass: worst <= tol, detail: format!("max relative error in x, P, K {worst:.2e} (tol {tol:.0e})") }
}

/// Cholesky-factor derivative: defining identity and finite differences.
fn square_root_sensitivity() -> Outcome {
    let (res_tol, fd_tol) = (1e-10, 1e-5);
    let mut g = rng(3);
    let (mut worst_res, mut worst_fd): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let n = g.random_range(1..=6);
        let p = random_spd(&mut g, n, 0.5);
        let dp = random_sym(&mut g, n);
        let l = cholesky(&p).unwrap();
        let dl = sqrt_sensitivity(&l, &dp).unwrap();
        let recomposed = &dl * l.transpose() + &*l * dl.transpose();
        worst_res = worst_res.max(rel(&recomposed, &dp));
        let h = 1e-6 * p.norm() / dp.norm();
        let lp = cholesky(&(&p + &dp * h)).unwrap().into_inner();
        let lm = cholesky(&(&p - &dp * h)).unwrap().into_inner();
        worst_fd = worst_fd.max(rel(&((lp - lm) / (2.0 * h)), &dl));
    }
    Outcome {
        pass: worst_res <= res_tol && worst_fd <= fd_tol,
        detail: format!(
            "1000 instances, residual {worst_res:.2e} (tol {res_tol:.0e}), finite difference {worst_fd:.2e} (tol {fd_tol:.0e})"
        ),
    }
}

/// Gain-equation residual along both scenarios and local minimality of the
/// cost at sampled steps.
fn gain_equation() -> Outcome {
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    let mut violations = 0;
    let mut g = rng(5);
    let u = Vector::zeros(0);
    for config in scenarios() {
        let (scenario, truth) = scenario_truth(config, 0);
        let cfg = filter_config(&scenario, FilterKind::Dckf, &truth.c_true);
        let dt = scenario.config.dt;
        let mut state = initial_state(&scenario);
        for k in 0..scenario.steps {
            let prior = time_update(&state, &cfg, &u, k as f64 * dt, dt).unwrap();
            let mi = measurement_intermediates(&prior, &cfg, &u).unwrap();
            let gain = compute_gain(&prior, &mi, &cfg).unwrap();
            let rhs = gain_equation_rhs(&mi.pxz, &cfg.weights, &prior.sens, &mi.gamma);
            let lhs = gain_equation_lhs(&gain, &mi.pzz, &cfg.weights, &mi.gamma);
            worst = worst.max(rel(&lhs, &rhs));
            if k % 10 == 0 {
                instances += 1;
                let cost = |kk: &Matrix| gain_cost(kk, &prior.p, &mi.pxz, &mi.pzz, &cfg.weights, &prior.sens, &mi.gamma);
                let j0 = cost(&gain);
                for _ in 0..100 {
                    let d = gaussian(&mut g, gain.nrows(), gain.ncols());
                    let step = g.random_range(1e-4..1e-1) * gain.norm() / d.norm();
                    if cost(&(&gain + d * step)) < j0 - 1e-13 * j0.abs() {
                        violations += 1;
                    }
                }
            }
            state = desens_ckf::filter::apply_gain(&prior, &mi, &truth.measurements[k], &gain, &cfg);
        }
    }
    Outcome {
        pass: worst <= tol && violations == 0,
        detail: format!(
            "residual {worst:.2e} (tol {tol:.0e}); {violations} cost decreases in {} perturbations",
            instances * 100
        ),
    }
}

/// Propagated sensitivities against central differences of the full filter.
fn filter_sensitivity() -> Outcome {
    let tol = 1e-3;
    let fb = sensitivity_fd_error(ScenarioConfig::falling_body(), FilterKind::Dckf, 30, 1e-4);
    let heli = sensitivity_fd_error(ScenarioConfig::helicopter(), FilterKind::Dckf, 30, 1e-4);
    Outcome {
        pass: fb <= tol && heli <= tol,
        detail: format!("30 steps, falling body {fb:.2e}, helicopter {heli:.2e} (tol {tol:.0e})"),
    }
}

fn value(s: &Summary, f: FilterKind, component: &str, metric: &str) -> f64 {
    s.get(f, component, metric).unwrap_or(f64::NAN)
}

fn falling_body_orderings() -> Outcome {
    let mut config = ScenarioConfig::falling_body();
    config.mc_runs = 100;
    let s = summarize(&run_scenario(&config).unwrap());
    let (p, i, d) = (FilterKind::PerfectCkf, FilterKind::ImperfectCkf, FilterKind::Dckf);
    let mut pass = true;
    let mut parts = Vec::new();
    for j in 1..=3 {
        let c = format!("x{j}/c1");
        let (si, sd) = (value(&s, i, &c, "mean_abs_sensitivity"), value(&s, d, &c, "mean_abs_sensitivity"));
        pass &= sd < si;
        parts.push(format!("|s{j}| dckf {sd:.3e} < imperfect {si:.3e}"));
    }
    for j in 1..=2 {
        let c = format!("x{j}");
        let (rp, ri, rd) = (value(&s, p, &c, "rmse"), value(&s, i, &c, "rmse"), value(&s, d, &c, "rmse"));
        pass &= rp <= rd && rd < ri;
        parts.push(format!("rmse x{j} {rp:.3e} <= {rd:.3e} < {ri:.3e}"));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn helicopter_orderings() -> Outcome {
    let mut config = ScenarioConfig::helicopter();
    config.mc_runs = 100;
    let s = summarize(&run_scenario(&config).unwrap());
    let (p, i, d) = (FilterKind::PerfectCkf, FilterKind::ImperfectCkf, FilterKind::Dckf);
    let mut pass = true;
    let mut parts = Vec::new();
    let cost = |f| value(&s, f, "all", "mean_cost");
    pass &= cost(p) < cost(d) && cost(d) < cost(i);
    parts.push(format!("cost {:.3e} < {:.3e} < {:.3e}", cost(p), cost(d), cost(i)));
    let mut rmse_ok = true;
    let mut nme_ok = true;
    let (mut worst_d, mut best_i): (f64, f64) = (0.0, 1.0);
    for j in 1..=4 {
        let c = format!("x{j}");
        let (rp, ri, rd) = (value(&s, p, &c, "rmse"), value(&s, i, &c, "rmse"), value(&s, d, &c, "rmse"));
        rmse_ok &= rp < rd && rd < ri;
        let (vd, vi) = (value(&s, d, &c, "nme_violation_fraction"), value(&s, i, &c, "nme_violation_fraction"));
        // Below the threshold in at least 90 % of steps, and more often than
        // the imperfect filter.
        nme_ok &= vd <= 0.10 && vd < vi;
        worst_d = worst_d.max(vd);
        best_i = best_i.min(vi);
    }
    pass &= rmse_ok && nme_ok;
    parts.push(format!("rmse perfect < dckf < imperfect for x1..x4: {rmse_ok}"));
    parts.push(format!(
        "nme above 1.96 in at most {:.1} % of steps for dckf, at least {:.1} % for imperfect",
        100.0 * worst_d,
        100.0 * best_i
    ));
    Outcome { pass, detail: parts.join("; ") }
}

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_desens-ckf"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env_remove("DESENS_CKF_SEED")
        .stdout(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Two invocations with the same seed and config, on different worker
/// counts, must write identical bytes.
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut identical = true;
    for (scenario, runs) in [("falling-body", "20"), ("helicopter", "100")] {
        let a = tmp.path().join(format!("{scenario}-a"));
        let b = tmp.path().join(format!("{scenario}-b"));
        let common = ["run", scenario, "--mc-runs", runs, "--seed", "2024"];
        let ok = run_cli(&a, &[&common[..], &["--jobs", "1"]].concat())
            && run_cli(&b, &[&common[..], &["--jobs", "4"]].concat());
        if !ok {
            return Outcome { pass: false, detail: format!("{scenario}: command failed") };
        }
        let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
        compared += fa.len();
        identical &= fa == fb;
    }
    Outcome { pass: identical, detail: format!("{compared} files compared byte for byte, identical: {identical}") }
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; the suite has
    // no filters, so only `--list` needs an answer.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let results = [
        report(1, "reduction identity", reduction_identity),
        report(2, "linear-Gaussian equivalence", linear_gaussian),
        report(3, "square-root sensitivity", square_root_sensitivity),
        report(4, "gain equation", gain_equation),
        report(5, "filter-level sensitivity", filter_sensitivity),
        report(6, "falling-body orderings (100 runs)", falling_body_orderings),
        report(7, "helicopter orderings (100 runs)", helicopter_orderings),
        report(8, "determinism", determinism),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
