//! Acceptance suite. Every criterion prints one `criterion N: PASS|FAIL` line
//! to stderr, bypassing the test harness's output capture, and then asserts.

mod common;

use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use common::{ks_critical, ks_statistic};
use ergocouple::coupling::{maximal_coupling_attempt, AcceptanceRule, CoupledPair, TrialOutcome};
use ergocouple::degenerate::{SirParams, TwoStepContext};
use ergocouple::dynamics::{Geometry, StatePoint, StepModel};
use ergocouple::estimation::{extrapolate_slope_in_h, fit_exponential_tail, fit_line, polyfit, FitPolicy, SurvivalCurve};
use ergocouple::rng::NoiseStream;
use ergocouple::run::{self, PointResult, RunConfig, RunReport, SURVIVAL_FILE};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn line(text: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{text}");
}

fn verdict(id: u32, pass: bool, elapsed: Duration, budget_s: f64, detail: &str) {
    let in_time = elapsed.as_secs_f64() < budget_s;
    let status = if pass && in_time { "PASS" } else { "FAIL" };
    line(&format!(
        "criterion {id}: {status} | {detail} | {:.1} s of {budget_s:.0} s",
        elapsed.as_secs_f64()
    ));
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its runtime budget");
}

fn config(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap_or_else(|e| panic!("bad acceptance config: {e}\n{text}"))
}

fn slopes(report: &RunReport) -> Vec<(f64, f64, f64)> {
    report
        .points
        .iter()
        .map(|p: &PointResult| {
            let e = p.estimate.unwrap_or_else(|| panic!("{}: tail could not be fitted", p.id));
            (p.sweep_value.unwrap_or(f64::NAN), e.slope_r, e.r_squared)
        })
        .collect()
}

fn fmt_slopes(s: &[(f64, f64, f64)]) -> String {
    s.iter().map(|(v, r, _)| format!("{v}:{r:.4}")).collect::<Vec<_>>().join(" ")
}

fn expanding_sweep(workers: usize, out: &Path) -> String {
    format!(
        "model.name = expanding\nrun.N = 100000\nrun.seed = 1\nrun.workers = {workers}\nrun.out = {}\n\
         sweep.key = eps\nsweep.values = 0.04, 0.08, 0.12\n",
        out.display()
    )
}

#[test]
fn criterion_01_geometric_oracle() {
    let _g = serial();
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, p) in [0.05f64, 0.1, 0.2].into_iter().enumerate() {
        let mut rng = NoiseStream::new(1, k as u64);
        let outcomes: Vec<TrialOutcome> = (0..100_000)
            .map(|_| {
                let mut t = 1;
                while !rng.bernoulli(p) {
                    t += 1;
                }
                TrialOutcome::Coupled(t)
            })
            .collect();
        let curve = SurvivalCurve::from_outcomes(&outcomes);
        let est = fit_exponential_tail::<f64>(&curve, &FitPolicy::default()).unwrap();
        let exact = -(1.0 - p).ln();
        let rel = (est.slope_r / exact - 1.0).abs();
        pass &= rel < 0.05;
        detail.push(format!("p={p}: {:.5} vs {exact:.5} ({:.2}%)", est.slope_r, 100.0 * rel));
    }
    verdict(1, pass, start.elapsed(), 10.0, &detail.join(", "));
}

fn attempt_marginals(rule: AcceptanceRule, delta: f64, n: usize) -> (f64, f64) {
    let s = 0.1;
    let m = StepModel::discrete_map(
        "gaussian",
        1,
        Geometry::Euclidean,
        std::sync::Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0]),
        s,
    )
    .unwrap();
    let pair = CoupledPair::new(
        &StatePoint::euclidean(vec![0.0]).unwrap(),
        &StatePoint::euclidean(vec![delta]).unwrap(),
    );
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n as u64 {
        let (next, _) = maximal_coupling_attempt(&m, &pair, rule, &mut NoiseStream::new(2, i)).unwrap();
        xs.push(next.x[0]);
        ys.push(next.y[0]);
    }
    let mut direct = NoiseStream::new(3, 0);
    let mut rx: Vec<f64> = (0..n).map(|_| s * direct.normal::<f64>()).collect();
    let mut ry: Vec<f64> = (0..n).map(|_| delta + s * direct.normal::<f64>()).collect();
    (ks_statistic(&mut xs, &mut rx), ks_statistic(&mut ys, &mut ry))
}

#[test]
fn criterion_02_maximal_coupling_marginals() {
    let _g = serial();
    let start = Instant::now();
    let n = 1_000_000;
    let crit = ks_critical(n, n, 1e-3);
    let mut pass = true;
    let mut detail = Vec::new();
    for delta in [0.05, 0.2] {
        let (dx, dy) = attempt_marginals(AcceptanceRule::ResidualOverlap, delta, n);
        pass &= dx < crit && dy < crit;
        detail.push(format!("Δ={delta}: D_x={dx:.5} D_y={dy:.5}"));
    }
    let elapsed = start.elapsed();
    let (dx, dy) = attempt_marginals(AcceptanceRule::MinMaxRatio, 0.05, n);
    line(&format!(
        "criterion 2 (info): min/max ratio rule at Δ=0.05 gives D_x={dx:.5} D_y={dy:.5} against critical {crit:.5}"
    ));
    verdict(2, pass, elapsed, 30.0, &format!("{} (critical {crit:.5})", detail.join(", ")));
}

#[test]
fn criterion_03_expanding_map() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = run::execute(&config(&expanding_sweep(1, dir.path()))).unwrap();
    let s = slopes(&report);
    let xs: Vec<f64> = s.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = s.iter().map(|p| p.1).collect();
    let fit = fit_line(&xs, &ys).unwrap();
    let min_tail_r2 = s.iter().map(|p| p.2).fold(1.0, f64::min);
    let pass = min_tail_r2 > 0.97 && fit.r_squared > 0.9;
    verdict(
        3,
        pass,
        start.elapsed(),
        300.0,
        &format!("slopes {} | min tail R² {min_tail_r2:.4} | slope-vs-ε R² {:.4}", fmt_slopes(&s), fit.r_squared),
    );
}

#[test]
fn criterion_04_quasiperiodic_map() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = config(&format!(
        "model.name = quasiperiodic\nrun.N = 100000\nrun.seed = 1\nrun.out = {}\n\
         sweep.key = eps\nsweep.values = 0.01, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12\n",
        dir.path().display()
    ));
    let s = slopes(&run::execute(&cfg).unwrap());
    let xs: Vec<f64> = s.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = s.iter().map(|p| p.1).collect();
    let linear = polyfit(&xs, &ys, 1).unwrap().residual_norm;
    let cubic = polyfit(&xs, &ys, 3).unwrap().residual_norm;
    verdict(
        4,
        cubic < 0.5 * linear,
        start.elapsed(),
        600.0,
        &format!("slopes {} | residual norm cubic {cubic:.3e} vs linear {linear:.3e} (ratio {:.3})", fmt_slopes(&s), cubic / linear),
    );
}

#[test]
fn criterion_05_logistic_coupling_versus_exit() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let base = format!("model.name = logistic\nmodel.eps = 0.12\nrun.N = 100000\nrun.seed = 1\nrun.out = {}\n", dir.path().display());
    let coupling = run::execute(&config(&base)).unwrap().points[0].estimate.expect("coupling tail");
    let exit = run::execute(&config(&format!("{base}algo = exit\nfit.min_survivors = 5\n")))
        .unwrap()
        .points[0]
        .estimate
        .expect("exit tail");
    let combined = (coupling.std_err.powi(2) + exit.std_err.powi(2)).sqrt();
    let pass = coupling.slope_r <= exit.slope_r + 2.0 * combined;
    verdict(
        5,
        pass,
        start.elapsed(),
        300.0,
        &format!(
            "coupling {:.4} ± {:.4} (window {}..{}) ≤ exit {:.4} ± {:.4} (window {}..{}) + 2·{combined:.4}",
            coupling.slope_r, coupling.std_err, coupling.t_lo, coupling.t_hi, exit.slope_r, exit.std_err, exit.t_lo, exit.t_hi
        ),
    );
}

#[test]
fn criterion_06_langevin_extrapolation() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = config(&format!(
        "model.name = langevin\ncoupling.strategy = reflection\ncoupling.beta = 0\nrun.N = 100000\nrun.seed = 1\n\
         run.out = {}\nsweep.key = sde.h\nsweep.values = 0.001, 0.002, 0.003\n",
        dir.path().display()
    ));
    let s = slopes(&run::execute(&cfg).unwrap());
    let pts: Vec<(f64, f64)> = s.iter().map(|p| (p.0, p.1)).collect();
    let ex = extrapolate_slope_in_h(&pts).unwrap();
    verdict(
        6,
        (0.8..=1.2).contains(&ex.intercept),
        start.elapsed(),
        600.0,
        &format!("slopes {} | h→0 intercept {:.4} ± {:.4}", fmt_slopes(&s), ex.intercept, ex.std_err),
    );
}

#[test]
fn criterion_07_van_der_pol() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = config(&format!(
        "model.name = vanderpol\nmodel.eps = 0.3\ncoupling.beta = 0.05\nrun.N = 10000\nrun.seed = 1\n\
         run.out = {}\nsweep.key = mu\nsweep.values = 2, 6, 12\n",
        dir.path().display()
    ));
    let s = slopes(&run::execute(&cfg).unwrap());
    let increasing = s.windows(2).all(|w| w[1].1 > w[0].1);
    verdict(7, increasing, start.elapsed(), 1800.0, &format!("slopes {}", fmt_slopes(&s)));
}

fn sir_run(rule: &str, out: &Path) -> (f64, f64, usize, usize) {
    let cfg = config(&format!(
        "model.name = sir\ncoupling.strategy = synchronous\ncoupling.beta = 0\ncoupling.rule = {rule}\n\
         run.N = 100000\nrun.seed = 1\nrun.out = {}\n",
        out.display()
    ));
    let e = run::execute(&cfg).unwrap().points[0].estimate.expect("SIR tail");
    (e.slope_r, e.r_squared, e.t_lo, e.t_hi)
}

#[test]
fn criterion_08_sir_two_step_coupling() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();

    let newton_start = Instant::now();
    let mut rng = NoiseStream::new(8, 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let s = 0.2 + 5.8 * rng.uniform::<f64>();
        let i = 0.2 + 5.8 * rng.uniform::<f64>();
        let c = TwoStepContext::new(SirParams::reference(), 0.001, s, i).unwrap();
        let (n1, n2) = (rng.normal::<f64>(), rng.normal::<f64>());
        let (r_s, r_i) = c.transform(n1, n2);
        let inv = c.invert_effective_normals(r_s, r_i, c.linear_guess(r_s, r_i).unwrap()).unwrap();
        worst = worst.max(inv.residual);
    }
    let newton_time = newton_start.elapsed().as_secs_f64();
    let newton_ok = worst < 1e-8 && newton_time < 10.0;

    let start = Instant::now();
    let (slope, r2, lo, hi) = sir_run("minmax", dir.path());
    let elapsed = start.elapsed();
    let (overlap, overlap_r2, _, _) = sir_run("overlap", dir.path());
    line(&format!(
        "criterion 8 (info): marginal-exact overlap rule gives slope {overlap:.4} (R² {overlap_r2:.4}), outside the band when above 0.6402"
    ));
    let in_band = (slope - 0.53349).abs() <= 0.2 * 0.53349;
    verdict(
        8,
        in_band && r2 > 0.95 && newton_ok,
        elapsed,
        3600.0,
        &format!(
            "slope {slope:.4} per unit time vs 0.53349 ± 20% | R² {r2:.4} (window {lo}..{hi}) | Newton max residual {worst:.2e} in {newton_time:.2} s"
        ),
    );
}

#[test]
fn criterion_09_fitzhugh_nagumo_ring() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let cfg = config(&format!(
        "model.name = fhn\nmodel.n = 10\nrun.N = 1000\nrun.seed = 1\nrun.out = {}\n\
         sweep.key = du\nsweep.values = 0, 0.3, 1\n",
        dir.path().display()
    ));
    let s = slopes(&run::execute(&cfg).unwrap());
    let non_increasing = s.windows(2).all(|w| w[1].1 <= w[0].1);
    verdict(9, non_increasing, start.elapsed(), 3600.0, &format!("slopes {}", fmt_slopes(&s)));
}

#[test]
fn criterion_10_worker_count_determinism() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut files = Vec::new();
    for workers in [1, 8] {
        let out = dir.path().join(format!("w{workers}"));
        run::run(&config(&expanding_sweep(workers, &out))).unwrap();
        let mut bytes = Vec::new();
        for v in ["0.04", "0.08", "0.12"] {
            bytes.push(std::fs::read(out.join(format!("eps={v}")).join(SURVIVAL_FILE)).unwrap());
        }
        files.push(bytes);
    }
    let identical = files[0] == files[1];
    let sizes: Vec<usize> = files[0].iter().map(Vec::len).collect();
    verdict(
        10,
        identical,
        start.elapsed(),
        600.0,
        &format!("survival.csv at 1 and 8 workers byte-identical: {identical} (sizes {sizes:?})"),
    );
}
