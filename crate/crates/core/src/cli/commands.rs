//! The five subcommands. Each writes its artifacts and returns the check
//! summaries that go into the manifest.

use std::fmt::Write as _;

use crate::averaging_lab::{isolating_probe, omega_sweep};
use crate::coefficients::{Lattice, ValidationReport};
use crate::conley::{asymptotic_potential, index_report};
use crate::error::{Error, Result};
use crate::process::{absorbing_ball_estimate, monitor_tail, skew_orbit, solve_process, ProcessState};
use crate::recurrence::{dense_orbit_returns, minimal_set_probe, orbit_diameter, recurrence_test, Verdict};

use super::config::RunConfig;
use super::output::{fmt_f64, OutputDir};

pub type Checks = Vec<(String, String)>;

fn bool_str(b: bool) -> String {
    if b { "pass".into() } else { "fail".into() }
}

fn validation_rows(r: &ValidationReport) -> Vec<Vec<String>> {
    let mut rows = vec![vec![
        r.check.clone(),
        format!("worst:{}", r.worst_point),
        fmt_f64(r.worst_residual),
        bool_str(r.passed()),
    ]];
    for v in &r.violations {
        rows.push(vec![r.check.clone(), v.point.clone(), fmt_f64(v.residual), "fail".into()]);
    }
    rows
}

/// Violators listed in the text report per check.
const REPORTED_VIOLATORS: usize = 10;

pub fn cmd_validate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Checks> {
    let model = &cfg.model;
    let v = &cfg.validate;
    let phase0 = cfg.phase0()?;
    let mut reports = vec![model.coeffs.validate_ellipticity(&phase0, v.tau_samples, v.xi_samples)?];
    let lattice = Lattice::on_grid(&model.grid, v.stride, v.phase_samples, v.u_max, v.u_samples);
    if model.nonlinearity.growth.is_some() {
        reports.push(model.nonlinearity.validate_growth(&phase0, &lattice)?);
    }
    let mut checks = Checks::new();
    let mut failed = Vec::new();
    let mut text = String::new();
    if model.nonlinearity.dissipation.is_some() {
        reports.push(model.nonlinearity.validate_dissipativeness(&phase0, &lattice)?);
        match model.nonlinearity.tail_decay_sequence(&model.grid, &v.tail_k) {
            Ok(m) => {
                let monotone = m.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
                out.csv(
                    "tail_decay.csv",
                    &["k", "m_k"],
                    v.tail_k.iter().zip(&m).map(|(k, m)| vec![fmt_f64(*k), fmt_f64(*m)]),
                )?;
                writeln!(text, "tail_decay: {} radii, nonincreasing = {monotone}", m.len()).ok();
                checks.push(("check.tail_decay".into(), "pass".into()));
            }
            Err(Error::Hypothesis(msg)) => {
                writeln!(text, "tail_decay: FAIL {msg}").ok();
                checks.push(("check.tail_decay".into(), "fail".into()));
                failed.push("tail_decay".to_string());
            }
            Err(e) => return Err(e),
        }
    }
    for r in &reports {
        writeln!(
            text,
            "{}: {} samples, worst residual {} at {}, {} violations",
            r.check,
            r.samples,
            fmt_f64(r.worst_residual),
            r.worst_point,
            r.violation_count
        )
        .ok();
        for viol in r.violations.iter().take(REPORTED_VIOLATORS) {
            writeln!(text, "  violator {} residual {}", viol.point, fmt_f64(viol.residual)).ok();
        }
        if r.violation_count > REPORTED_VIOLATORS {
            writeln!(text, "  ... {} more", r.violation_count - REPORTED_VIOLATORS).ok();
        }
        checks.push((format!("check.{}", r.check), bool_str(r.passed())));
        if !r.passed() {
            failed.push(r.check.clone());
        }
    }
    out.csv(
        "validation.csv",
        &["check", "point", "residual", "pass"],
        reports.iter().flat_map(validation_rows),
    )?;
    out.text("report.txt", &text)?;
    print!("{text}");
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(Error::Hypothesis(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn cmd_simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Checks> {
    let model = &cfg.model;
    let r = &cfg.run;
    let phase0 = cfg.phase0()?;
    let u0 = cfg.initial_field()?;
    let traj = solve_process(model, &phase0, r.lambda, r.omega, r.s, r.t_end, &u0, &cfg.control)?;
    let ks: Vec<f64> = cfg.tail_k.iter().copied().filter(|&k| k > 0.0 && k < model.grid.half_width()).collect();

    let mut header = vec!["t".to_string(), "l2".into(), "h1".into()];
    header.extend(ks.iter().map(|k| format!("tail_{}", fmt_f64(*k))));
    header.extend((1..=phase0.dim()).map(|i| format!("phase_{i}")));
    let mut rows = Vec::with_capacity(traj.samples.len());
    for (i, st) in traj.samples.iter().enumerate() {
        let mut row = vec![fmt_f64(st.t), fmt_f64(traj.l2[i]), fmt_f64(traj.h1[i])];
        for &k in &ks {
            row.push(fmt_f64(st.u.tail_mass(k)?));
        }
        row.extend(st.phase.angles().iter().map(|a| fmt_f64(*a)));
        rows.push(row);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("trajectory.csv", &header_refs, rows)?;

    let mut checks = Checks::new();
    let mut text = String::new();
    writeln!(
        text,
        "steps of {} to t = {}, {} samples, guard {}",
        fmt_f64(traj.step),
        fmt_f64(traj.last.t),
        traj.samples.len(),
        fmt_f64(traj.guard)
    )
    .ok();
    if let Some(d) = &model.nonlinearity.dissipation {
        let mk: Vec<f64> = ks
            .iter()
            .copied()
            .filter(|k| std::f64::consts::SQRT_2 * k <= model.grid.half_width())
            .collect();
        let rep = monitor_tail(model, &traj, d.nu, &mk)?;
        writeln!(text, "tail monitor: {}", rep.header()).ok();
        let mut rows = Vec::new();
        for c in &rep.checks {
            writeln!(
                text,
                "  k = {}: eta = {}, m_k = {}, min margin {}, violations {}{}",
                fmt_f64(c.k),
                fmt_f64(c.eta),
                fmt_f64(c.m_k),
                fmt_f64(c.min_margin()),
                c.violations,
                if c.violations > 0 { " WARN" } else { "" }
            )
            .ok();
            for (t, lhs, bound) in &c.rows {
                rows.push(vec![
                    fmt_f64(c.k),
                    fmt_f64(c.eta),
                    fmt_f64(*t),
                    fmt_f64(*lhs),
                    fmt_f64(*bound),
                    fmt_f64(bound - lhs),
                    bool_str(lhs <= bound),
                ]);
            }
        }
        out.csv("tail_monitor.csv", &["k", "eta", "t", "lhs", "bound", "margin", "pass"], rows)?;
        checks.push(("check.tail_monitor".into(), if rep.violations() == 0 { "pass".into() } else { "warn".into() }));
        if let Some(r2) = absorbing_ball_estimate(model) {
            writeln!(text, "absorbing-ball scale for ||u||^2: {}", fmt_f64(r2)).ok();
            checks.push(("absorbing_ball_sq".into(), fmt_f64(r2)));
        }
    }
    if cfg.snapshot_every > 0 {
        for (i, st) in traj.samples.iter().enumerate().step_by(cfg.snapshot_every) {
            out.snapshot(&format!("snapshots/snap_{i:06}.apfx"), &st.u)?;
        }
    }
    out.snapshot("final.apfx", &traj.last.u)?;
    out.text("report.txt", &text)?;
    print!("{text}");
    checks.push(("samples".into(), traj.samples.len().to_string()));
    checks.push(("step".into(), fmt_f64(traj.step)));
    Ok(checks)
}

pub fn cmd_average(cfg: &RunConfig, out: &mut OutputDir) -> Result<Checks> {
    let model = &cfg.model;
    let r = &cfg.run;
    let omegas = r
        .omega_list
        .as_ref()
        .ok_or_else(|| Error::config("[run] omega_list is required for `average`"))?;
    let phase0 = cfg.phase0()?;
    let u0 = cfg.initial_field()?;
    let horizon = r.t_end - r.s;
    let sweep = omega_sweep(model, &phase0, r.lambda, omegas, &u0, horizon, &cfg.control)?;
    let mut text = String::new();
    let rows = sweep.entries.iter().map(|e| match &e.result {
        Some(a) => vec![
            fmt_f64(e.omega),
            fmt_f64(a.e_l2),
            fmt_f64(a.e_h1),
            fmt_f64(a.horizon),
            fmt_f64(a.step),
            a.osc_resolution.to_string(),
            "ok".into(),
        ],
        None => vec![
            fmt_f64(e.omega),
            String::new(),
            String::new(),
            fmt_f64(horizon),
            String::new(),
            cfg.control.osc_resolution.to_string(),
            e.failure.clone().unwrap_or_default(),
        ],
    });
    out.csv("averaging.csv", &["omega", "E_L2", "E_H1", "T", "step", "osc_resolution", "status"], rows)?;
    for e in &sweep.entries {
        match &e.result {
            Some(a) => writeln!(text, "omega {}: E_H1 {} E_L2 {}", fmt_f64(e.omega), fmt_f64(a.e_h1), fmt_f64(a.e_l2)),
            None => writeln!(text, "omega {}: failed: {}", fmt_f64(e.omega), e.failure.as_deref().unwrap_or("")),
        }
        .ok();
    }
    let ratios: Vec<String> = sweep.h1_ratios().iter().map(|x| fmt_f64(*x)).collect();
    writeln!(text, "E_H1 ratios: {}", ratios.join(", ")).ok();
    let mut checks = vec![("check.e_h1_decreasing".to_string(), bool_str(sweep.strictly_decreasing_h1()))];

    if let Some((opts, lambdas)) = &cfg.probe {
        let rep = isolating_probe(model, &phase0, &u0, lambdas, r.omega, opts, &cfg.control)?;
        out.csv(
            "probe.csv",
            &["lambda", "start_id", "dwell", "exit_time", "flag"],
            rep.rows.iter().map(|p| {
                vec![
                    fmt_f64(p.lambda),
                    p.start_id.to_string(),
                    fmt_f64(p.dwell),
                    p.exit_time.map(fmt_f64).unwrap_or_default(),
                    p.flag.to_string(),
                ]
            }),
        )?;
        writeln!(text, "isolating probe (heuristic, forward orbits only):").ok();
        for (lam, flagged, hist) in &rep.per_lambda {
            writeln!(text, "  lambda {}: flagged {:?}, dwell histogram {:?}", fmt_f64(*lam), flagged, hist).ok();
        }
        checks.push(("probe.flags".into(), rep.rows.iter().filter(|p| p.flag).count().to_string()));
    }
    out.text("report.txt", &text)?;
    print!("{text}");
    Ok(checks)
}

pub fn cmd_index(cfg: &RunConfig, out: &mut OutputDir) -> Result<Checks> {
    let potential = match &cfg.index.potential {
        Some(p) => p.clone(),
        None => asymptotic_potential(&cfg.model.nonlinearity.average(), cfg.model.grid.dim())?,
    };
    let rep = index_report(&potential, &cfg.index.options)?;
    out.csv(
        "eigenvalues.csv",
        &["k", "eigenvalue"],
        rep.eigenvalues.iter().enumerate().map(|(k, e)| vec![k.to_string(), fmt_f64(*e)]),
    )?;
    let mut text = String::new();
    writeln!(text, "nu_tilde = {}", fmt_f64(potential.nu_tilde)).ok();
    writeln!(
        text,
        "grid: dim {}, L = {}, {} interior points per axis (Dirichlet)",
        rep.dim,
        fmt_f64(rep.half_width),
        rep.n
    )
    .ok();
    writeln!(text, "eigenvalues below nu_tilde/2: {}", rep.eigenvalues.len()).ok();
    writeln!(text, "m = {}", rep.m).ok();
    writeln!(text, "nonresonant = {} (tol_ker {})", rep.nonresonant, fmt_f64(rep.tol_ker)).ok();
    writeln!(text, "ambiguous = {} (tol_neg {})", rep.ambiguous, fmt_f64(rep.tol_neg)).ok();
    writeln!(text, "index = {}", rep.index).ok();
    writeln!(text, "nontrivial = {}", rep.index.nontrivial()).ok();
    out.text("report.txt", &text)?;
    print!("{text}");
    Ok(vec![
        ("m".into(), rep.m.to_string()),
        ("nonresonant".into(), rep.nonresonant.to_string()),
        ("index".into(), rep.index.to_string()),
    ])
}

pub fn cmd_recurrence(cfg: &RunConfig, out: &mut OutputDir) -> Result<Checks> {
    let model = &cfg.model;
    let r = &cfg.run;
    let rs = &cfg.recurrence;
    let phase0 = cfg.phase0()?;
    let state0 = ProcessState { phase: phase0.translate(r.omega, r.s), u: cfg.initial_field()?, t: r.s };
    let traj = skew_orbit(model, &state0, r.lambda, r.omega, r.t_end, &cfg.control)?;
    let base = traj
        .samples
        .iter()
        .position(|s| s.t >= r.s + rs.burn_in - 1e-9)
        .unwrap_or(traj.samples.len() - 1);
    let metric = rs.options.metric;
    let epsilon = match rs.epsilon {
        Some(e) => e,
        None => rs.epsilon_fraction * orbit_diameter(&traj, base, &metric)?,
    };
    let mut text = String::new();
    let mut checks = Checks::new();
    writeln!(text, "base time {}, epsilon {}", fmt_f64(traj.samples[base].t), fmt_f64(epsilon)).ok();
    let epsilon = if epsilon > 0.0 { epsilon } else { f64::MIN_POSITIVE };
    match recurrence_test(&traj, base, epsilon, &rs.options) {
        Ok(rep) => {
            out.csv("returns.csv", &["t"], rep.return_times.iter().map(|t| vec![fmt_f64(*t)]))?;
            writeln!(
                text,
                "verdict {}: {} returns, max gap {}, ell estimate {}, window {}",
                rep.verdict,
                rep.return_times.len(),
                fmt_f64(rep.max_gap),
                fmt_f64(rep.ell_estimate),
                fmt_f64(rep.window)
            )
            .ok();
            checks.push(("verdict".into(), rep.verdict.to_string()));
            checks.push(("ell_estimate".into(), fmt_f64(rep.ell_estimate)));
        }
        Err(Error::TooShort { needed, got }) => {
            out.csv("returns.csv", &["t"], std::iter::empty())?;
            writeln!(
                text,
                "verdict {}: window too short ({got} samples after base, {needed} needed)",
                Verdict::Inconclusive
            )
            .ok();
            checks.push(("verdict".into(), Verdict::Inconclusive.to_string()));
        }
        Err(e) => return Err(e),
    }

    if let Some(delta) = rs.delta {
        let target = match &rs.target {
            Some(a) => crate::symbols::HullPhase::new(phase0.frequencies().to_vec(), a.clone())?,
            None => phase0.clone(),
        };
        let dense = dense_orbit_returns(&phase0, r.omega, &target, delta, rs.dense_t_max)?;
        let nearest = |t: f64| {
            traj.samples
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.t - t).abs().total_cmp(&(b.1.t - t).abs()))
                .map(|(i, s)| (s.t, traj.h1[i]))
        };
        let rows = dense.times.iter().zip(&dense.distances).map(|(&t, &d)| {
            let (st, h1) = if t >= r.s && t <= r.t_end { nearest(t).unwrap_or((f64::NAN, f64::NAN)) } else { (f64::NAN, f64::NAN) };
            vec![fmt_f64(t), fmt_f64(d), fmt_f64(st), fmt_f64(h1)]
        });
        out.csv("dense_returns.csv", &["t", "torus_distance", "candidate_sample_t", "candidate_h1"], rows)?;
        writeln!(
            text,
            "dense orbit: {} visits to the {}-ball within T = {}, closest {}",
            dense.times.len(),
            fmt_f64(delta),
            fmt_f64(rs.dense_t_max),
            fmt_f64(dense.closest)
        )
        .ok();
        checks.push(("dense_returns".into(), dense.times.len().to_string()));
    }

    if let Some(eps) = rs.cluster_eps {
        let m = minimal_set_probe(&traj, base, eps, &metric)?;
        out.csv(
            "clusters.csv",
            &["cluster", "size", "diameter", "first_t", "last_t", "visits"],
            m.clusters.iter().enumerate().map(|(i, c)| {
                vec![
                    i.to_string(),
                    c.size.to_string(),
                    fmt_f64(c.diameter),
                    fmt_f64(c.first_time),
                    fmt_f64(c.last_time),
                    c.visits.to_string(),
                ]
            }),
        )?;
        writeln!(
            text,
            "minimal-set probe: {} clusters from {} samples, consistent with minimal = {}",
            m.clusters.len(),
            m.samples_used,
            m.consistent_with_minimal
        )
        .ok();
        checks.push(("clusters".into(), m.clusters.len().to_string()));
    }
    out.text("report.txt", &text)?;
    print!("{text}");
    Ok(checks)
}
