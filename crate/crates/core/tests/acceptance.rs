//! End-to-end acceptance checks. Each prints one PASS/FAIL line with its
//! measured values and runtime.

mod common;

use std::f64::consts::{PI, SQRT_2, TAU};
use std::time::{Duration, Instant};

use apflow::averaging_lab::omega_sweep;
use apflow::coefficients::{EllipticCoefficients, HomotopyParam, NonlinearitySpec, SpatialProfile};
use apflow::conley::{index_report, schrodinger_spectrum, IndexOptions, PotentialSpec};
use apflow::process::{check_translation_identity, monitor_tail, solve_process, Model, StepControl};
use apflow::propagator::{linear_propagate, propagator_deviation, PropagatorContext, DEFAULT_DEVIATION_SAMPLES};
use apflow::recurrence::{orbit_diameter, recurrence_test, ProductMetric, RecurrenceOptions, Verdict};
use apflow::spectral_field::{Field, Grid};
use apflow::symbols::{HullPhase, Mode, QuasiPeriodicSignal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

// Tolerances and limits.
const HEAT_REL_TOL: f64 = 1e-10;
const COCYCLE_REL_TOL: f64 = 1e-12;
const TRANSLATION_TOL: f64 = 1e-8;
const AVERAGING_HALVING: f64 = 0.5;
const AVERAGING_STABILITY: f64 = 0.05;
const TAIL_KS: [f64; 2] = [0.25, 0.5];
const BOUND_STATE_TOL: f64 = 2e-3;
const RICHARDSON_RANGE: (f64, f64) = (3.5, 4.5);
const ELL_REL_TOL: f64 = 0.2;

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn report(id: u32, name: &str, ok: bool, detail: String, elapsed: Duration, limit: Duration) {
    let timely = elapsed <= limit;
    println!(
        "criterion {id:>2} {}: {name}: {detail} [{:.2?} of {:.0?}]",
        if ok && timely { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
    assert!(timely, "criterion {id} ({name}) exceeded {limit:?}: {elapsed:?}");
}

#[test]
fn criterion_01_exact_propagator() {
    let start = Instant::now();
    let grid = Grid::new(1, PI, 64).unwrap();
    let ctx = PropagatorContext::new(EllipticCoefficients::identity(1), HomotopyParam::FULL, 1.0, HullPhase::zero(vec![]))
        .unwrap();
    let mut worst_heat: f64 = 0.0;
    for k in 1..=5usize {
        let u = Field::from_fn(grid, |x| (k as f64 * x[0]).cos());
        let v = linear_propagate(&ctx, 0.0, 1.0, &u).unwrap();
        let amp = v.spectrum()[k].norm() / u.spectrum()[k].norm();
        let expect = (-((k * k) as f64)).exp();
        worst_heat = worst_heat.max((amp - expect).abs() / expect);
    }

    let a = oscillating_a();
    let ctx = PropagatorContext::new(a.clone(), HomotopyParam::FULL, 10.0, HullPhase::new(a.frequencies(), vec![0.4]).unwrap())
        .unwrap();
    let grid = Grid::new(1, 8.0, 128).unwrap();
    let u = gaussian(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_cocycle: f64 = 0.0;
    for _ in 0..50 {
        let mut p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        p.sort_by(f64::total_cmp);
        let [r, s, t] = p;
        let two = linear_propagate(&ctx, s, t, &linear_propagate(&ctx, r, s, &u).unwrap()).unwrap();
        let one = linear_propagate(&ctx, r, t, &u).unwrap();
        worst_cocycle = worst_cocycle.max(two.l2_distance(&one).unwrap() / one.l2_norm());
    }
    report(
        1,
        "exact propagator",
        worst_heat <= HEAT_REL_TOL && worst_cocycle <= COCYCLE_REL_TOL,
        format!("heat rel err {worst_heat:.2e}, cocycle rel err {worst_cocycle:.2e}"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_02_translation_identity() {
    let start = Instant::now();
    let model = standard_model(256, 16.0);
    let control = StepControl { h_max: 0.05, ..StepControl::default() };
    let omega = 10.0;
    let u0 = gaussian(model.grid);
    let h_eff = control.effective_step(omega, model.max_frequency());
    let (_, h) = apflow::process::uniform_schedule(2.0, h_eff);
    let phase0 = HullPhase::new(model.frequencies(), vec![0.3]).unwrap();
    let d = check_translation_identity(&model, &phase0, HomotopyParam::FULL, omega, 0.0, 2.0, 7.0 * h, &u0, &control)
        .unwrap();
    report(
        2,
        "translation identity",
        d <= TRANSLATION_TOL,
        format!("H1 discrepancy {d:.2e} (shift 7 steps of {h:.4e})"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_03_mean_value_bound() {
    let start = Instant::now();
    let sig = QuasiPeriodicSignal::new(0.0, vec![Mode::new(1.0, 1.0, 0.0), Mode::new(SQRT_2, 1.0, 0.0)]).unwrap();
    let freqs = vec![1.0, SQRT_2];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ok = true;
    let mut detail = Vec::new();
    for window in [10.0, 100.0, 1000.0] {
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let s = rng.random_range(-1e4..1e4);
            let phase = HullPhase::new(freqs.clone(), vec![rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)]).unwrap();
            worst = worst.max(sig.finite_average(&phase, s, window).unwrap().abs());
        }
        let bound = sig.mu_bound(window);
        ok &= worst <= bound;
        detail.push(format!("T={window}: sup {worst:.3e} <= {bound:.3e}"));
    }
    let law = sig.mu_bound(1000.0) <= sig.mu_bound(10.0) / 100.0 * (1.0 + 1e-12);
    ok &= law;
    report(
        3,
        "mean-value bound",
        ok,
        format!("{}; 1/T law {law}", detail.join(", ")),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

fn averaging_setup() -> (Model, Field, HullPhase) {
    let model = standard_model(256, 16.0);
    let u0 = gaussian(model.grid);
    let phase0 = model.zero_phase();
    (model, u0, phase0)
}

#[test]
fn criterion_04_averaging_principle() {
    let start = Instant::now();
    let (model, u0, phase0) = averaging_setup();
    let omegas = [10.0, 100.0, 1000.0];
    let coarse = StepControl { h_max: 0.05, osc_resolution: 16, ..StepControl::default() };
    let fine = StepControl { osc_resolution: 32, ..coarse };
    let a = omega_sweep(&model, &phase0, HomotopyParam::FULL, &omegas, &u0, 2.0, &coarse).unwrap();
    let b = omega_sweep(&model, &phase0, HomotopyParam::FULL, &omegas, &u0, 2.0, &fine).unwrap();
    let ea: Vec<f64> = a.entries.iter().map(|e| e.result.as_ref().unwrap().e_h1).collect();
    let eb: Vec<f64> = b.entries.iter().map(|e| e.result.as_ref().unwrap().e_h1).collect();
    let decreasing = a.strictly_decreasing_h1();
    let halved = ea[2] <= AVERAGING_HALVING * ea[0];
    let drift = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs() / x).fold(0.0, f64::max);
    report(
        4,
        "averaging principle",
        decreasing && halved && drift < AVERAGING_STABILITY,
        format!("E_H1 {}, refined {}, max relative change {drift:.2e}", sci(&ea), sci(&eb)),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_05_propagator_deviation() {
    let start = Instant::now();
    let a = oscillating_a();
    let grid = Grid::new(1, 16.0, 256).unwrap();
    let u = gaussian(grid);
    let devs: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&w| {
            let ctx = PropagatorContext::new(a.clone(), HomotopyParam::FULL, w, HullPhase::zero(a.frequencies())).unwrap();
            propagator_deviation(&ctx, 2.0, &u, DEFAULT_DEVIATION_SAMPLES).unwrap()
        })
        .collect();
    report(
        5,
        "propagator deviation",
        devs.windows(2).all(|w| w[1] < w[0]),
        format!("L2 deviation {}", sci(&devs)),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_06_tail_mass_bound() {
    let start = Instant::now();
    let half_width = 16.0;
    let model = Model::new(Grid::new(1, half_width, 256).unwrap(), oscillating_a(), linear_damping()).unwrap();
    let u0 = Field::from_fn(model.grid, |x| SpatialProfile::bump(3.0).eval(x));
    let control = StepControl { h_max: 0.05, ..StepControl::default() };
    let traj = solve_process(&model, &model.zero_phase(), HomotopyParam::FULL, 10.0, 0.0, 5.0, &u0, &control).unwrap();
    let ks: Vec<f64> = TAIL_KS.iter().map(|f| f * half_width).collect();
    let rep = monitor_tail(&model, &traj, 1.0, &ks).unwrap();
    let margins: Vec<f64> = rep.checks.iter().map(|c| c.min_margin()).collect();
    report(
        6,
        "tail-mass bound",
        rep.violations() == 0,
        format!("{} violations over {} samples, min margins {}", rep.violations(), traj.samples.len(), sci(&margins)),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_07_conley_index() {
    let start = Instant::now();
    let opts = |n| IndexOptions { half_width: 20.0, n, tol_neg: None, tol_ker: None, include_symbol_space: false };
    let trivial = PotentialSpec::constant_shift(1, 1.0, vec![]).unwrap();
    let ra = index_report(&trivial, &opts(2048)).unwrap();
    let ok_a = ra.m == 0 && ra.index.to_string() == "Sphere(0)" && ra.nonresonant && ra.index.nontrivial();

    let well = PotentialSpec::constant_shift(1, 0.05, vec![SpatialProfile::sech2(1.0).with_amplitude(2.0)]).unwrap();
    let rb = index_report(&well, &opts(2048)).unwrap();
    let e2048 = rb.eigenvalues[0];
    let e4096 = schrodinger_spectrum(&well, 20.0, 4096, 1).unwrap()[0];
    let richardson = e4096 + (e4096 - e2048) / 3.0;
    let ok_b = rb.m == 1 && (e2048 - richardson).abs() <= BOUND_STATE_TOL && rb.nonresonant && rb.index.nontrivial();
    report(
        7,
        "Conley index",
        ok_a && ok_b,
        format!(
            "(a) m={} {} nonresonant={}; (b) m={} {} e2048={e2048:.6} richardson={richardson:.6}",
            ra.m, ra.index, ra.nonresonant, rb.m, rb.index
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_08_order_two() {
    let start = Instant::now();
    let grid = Grid::new(1, 16.0, 256).unwrap();
    let model = Model::new(grid, EllipticCoefficients::identity(1), NonlinearitySpec::new(vec![damping()])).unwrap();
    let u0 = gaussian(grid);
    let t_end = 1.0;
    let exact = {
        let k2 = grid.mode_norms_sq();
        let spec = u0.spectrum().iter().zip(&k2).map(|(c, k)| c * (-(1.0 + k) * t_end).exp()).collect();
        Field::from_spectrum(grid, spec)
    };
    let err = |h: f64| {
        let c = StepControl { h_max: h, ..StepControl::default() };
        let traj = solve_process(&model, &model.zero_phase(), HomotopyParam::FULL, 1.0, 0.0, t_end, &u0, &c).unwrap();
        traj.last.u.l2_distance(&exact).unwrap()
    };
    let (e1, e2) = (err(0.1), err(0.05));
    let ratio = e1 / e2;
    report(
        8,
        "order-2 stepping",
        ratio >= RICHARDSON_RANGE.0 && ratio <= RICHARDSON_RANGE.1,
        format!("errors {e1:.3e}, {e2:.3e}, ratio {ratio:.3}"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_09_recurrence() {
    let start = Instant::now();
    let grid = Grid::new(1, 16.0, 256).unwrap();
    let omega = 5.0;
    let (t_end, burn_in) = (40.0, 10.0);
    let control = StepControl { h_max: 0.05, osc_resolution: 64, ..StepControl::default() };
    let opts = RecurrenceOptions::default();

    let forced = Model::new(grid, EllipticCoefficients::identity(1), forced_damping()).unwrap();
    let traj = solve_process(&forced, &forced.zero_phase(), HomotopyParam::FULL, omega, 0.0, t_end, &Field::zeros(grid), &control)
        .unwrap();
    let base = traj.samples.iter().position(|s| s.t >= burn_in - 1e-9).unwrap();
    let eps = 0.1 * orbit_diameter(&traj, base, &ProductMetric::default()).unwrap();
    let r = recurrence_test(&traj, base, eps, &opts).unwrap();
    let period = TAU / omega;
    let ell_ok = ((r.ell_estimate - period) / period).abs() <= ELL_REL_TOL;

    let decay = Model::new(grid, EllipticCoefficients::identity(1), NonlinearitySpec::new(vec![damping()])).unwrap();
    let dtraj = solve_process(&decay, &decay.zero_phase(), HomotopyParam::FULL, omega, 0.0, t_end, &gaussian(grid), &control)
        .unwrap();
    let deps = 0.1 * orbit_diameter(&dtraj, 0, &ProductMetric::default()).unwrap();
    let d = recurrence_test(&dtraj, 0, deps, &opts).unwrap();
    report(
        9,
        "recurrence",
        r.verdict == Verdict::RecurrentConsistent && ell_ok && d.verdict == Verdict::NonRecurrentEvidence,
        format!(
            "forced: {} ell={:.4} vs period {period:.4}; decay: {}",
            r.verdict, r.ell_estimate, d.verdict
        ),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

const DETERMINISM_CONFIG: &str = "
[grid]
dim = 1
half_width = 8
points = 64

[coefficients]
nu0 = 0.5
a11 = 1; 1:0.5:0

[nonlinearity]
term.1 = signal: -1 | space: constant | psi: identity
term.2 = signal: 0; 1:1:0 | space: sech(width=1) | psi: tanh
growth_c = 2

[dissipation]
young_epsilon = 0.5

[run]
omega = 5
t_end = 25
u0 = random(modes=4, amplitude=0.5)
seed = 7
omega_list = 5, 20

[control]
h_max = 0.05
osc_resolution = 16

[outputs]
snapshot_every = 50

[validate]
phase_samples = 4
u_samples = 5

[recurrence]
burn_in = 5
delta = 0.1
dense_t_max = 25
cluster_eps = 0.5

[probe]
n_starts = 3
horizon = 1
lambdas = 0, 1
";

fn run_cli(command: &str, config: &std::path::Path, out: &std::path::Path, jobs: &str) -> i32 {
    std::process::Command::new(env!("CARGO_BIN_EXE_apflow"))
        .args([command, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--jobs", jobs])
        .output()
        .expect("spawn apflow")
        .status
        .code()
        .unwrap_or(-1)
}

fn files_with_ext(dir: &std::path::Path, ext: &str) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == ext) {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.ini");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for command in ["validate", "simulate", "average", "index", "recurrence"] {
        let a = tmp.path().join(format!("{command}_a"));
        let b = tmp.path().join(format!("{command}_b"));
        let codes = (run_cli(command, &config, &a, "1"), run_cli(command, &config, &b, "4"));
        let (fa, fb) = (files_with_ext(&a, "csv"), files_with_ext(&b, "csv"));
        if codes != (0, 0) || fa.is_empty() || fa != fb {
            mismatched.push(format!("{command} exit {codes:?}"));
        }
        compared += fa.len();
    }
    report(
        10,
        "determinism",
        mismatched.is_empty(),
        format!("{compared} CSV files identical across reruns (jobs 1 vs 4); mismatches {mismatched:?}"),
        start.elapsed(),
        Duration::from_secs(300),
    );
}
