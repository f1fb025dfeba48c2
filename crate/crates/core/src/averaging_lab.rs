//! Averaging-principle experiments and the forward isolating-neighbourhood probe.

use rayon::prelude::*;

use crate::coefficients::HomotopyParam;
use crate::error::{Error, Result};
use crate::process::{solve_averaged_with_step, uniform_schedule, Model, ProcessState, StepControl, Stepper};
use crate::sampling::halton;
use crate::spectral_field::{Field, Grid};
use crate::symbols::HullPhase;

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingResult {
    pub omega: f64,
    pub lambda: f64,
    /// `max_t ‖Π(t,0)u₀ − π(t)u₀‖_{H¹}` over the shared samples.
    pub e_h1: f64,
    pub e_l2: f64,
    pub horizon: f64,
    /// Step shared by both runs.
    pub step: f64,
    pub steps: usize,
    pub osc_resolution: usize,
    /// `max_m mu_bound(ωT)` over the model signals: scale of the hull
    /// dependence of `E`.
    pub mu_scale: f64,
}

/// Runs the process and the averaged semiflow on the same schedule and
/// compares them at every sample.
pub fn averaging_error(
    model: &Model,
    phase0: &HullPhase,
    lambda: HomotopyParam,
    omega: f64,
    u0: &Field,
    horizon: f64,
    control: &StepControl,
) -> Result<AveragingResult> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("averaging horizon must be positive, got {horizon}")));
    }
    control.validate()?;
    let h_eff = control.effective_step(omega, model.max_frequency());
    let (n, h) = uniform_schedule(horizon, h_eff);
    let guard = control.guard_for(u0);
    let state = ProcessState { phase: phase0.clone(), u: u0.clone(), t: 0.0 };
    let full = Stepper::new(model, lambda, omega)?.run(state, n, h, control.sample_every, guard)?;
    let avg = solve_averaged_with_step(model, u0, n, h, control)?;
    let mut e_h1: f64 = 0.0;
    let mut e_l2: f64 = 0.0;
    for (a, b) in full.samples.iter().zip(&avg.samples) {
        let d = a.u.sub(&b.u)?;
        e_h1 = e_h1.max(d.h1_norm());
        e_l2 = e_l2.max(d.l2_norm());
    }
    let mu_scale = model
        .coeffs
        .signals()
        .chain(model.nonlinearity.signals())
        .map(|s| s.mu_bound(omega * horizon))
        .fold(0.0, f64::max);
    Ok(AveragingResult {
        omega,
        lambda: lambda.value(),
        e_h1,
        e_l2,
        horizon,
        step: h,
        steps: n,
        osc_resolution: control.osc_resolution,
        mu_scale,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub omega: f64,
    pub result: Option<AveragingResult>,
    /// Failure message when the run did not complete.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// `E_H1(ω_{i+1}) / E_H1(ω_i)` for consecutive completed runs.
    pub fn h1_ratios(&self) -> Vec<f64> {
        let done: Vec<&AveragingResult> = self.entries.iter().filter_map(|e| e.result.as_ref()).collect();
        done.windows(2).map(|w| w[1].e_h1 / w[0].e_h1).collect()
    }

    pub fn strictly_decreasing_h1(&self) -> bool {
        let done: Vec<f64> = self.entries.iter().filter_map(|e| e.result.as_ref().map(|r| r.e_h1)).collect();
        done.len() == self.entries.len() && done.windows(2).all(|w| w[1] < w[0])
    }
}

/// `averaging_error` for each ω; runs are independent and dispatched in
/// parallel, results keep the input order.
pub fn omega_sweep(
    model: &Model,
    phase0: &HullPhase,
    lambda: HomotopyParam,
    omegas: &[f64],
    u0: &Field,
    horizon: f64,
    control: &StepControl,
) -> Result<SweepReport> {
    if omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("omega list must be strictly increasing"));
    }
    let entries = omegas
        .par_iter()
        .map(|&omega| match averaging_error(model, phase0, lambda, omega, u0, horizon, control) {
            Ok(r) => SweepEntry { omega, result: Some(r), failure: None },
            Err(e) => SweepEntry { omega, result: None, failure: Some(e.to_string()) },
        })
        .collect();
    Ok(SweepReport { entries })
}

/// Lowest real Fourier modes ordered by `|ξ|²`, each with unit H¹ norm.
pub fn low_mode_basis(grid: &Grid, count: usize) -> Vec<Field> {
    let dim = grid.dim();
    let base = std::f64::consts::PI / grid.half_width();
    let kmax = grid.points_per_dim() as i64 / 2 - 1;
    let mut wave: Vec<(i64, i64)> = Vec::new();
    let reach = (count as f64).sqrt().ceil() as i64 + 1;
    match dim {
        1 => wave.extend((0..=kmax.min(count as i64)).map(|k| (k, 0))),
        _ => {
            for a in 0..=reach.min(kmax) {
                for b in -reach.min(kmax)..=reach.min(kmax) {
                    // one representative per ±k pair
                    if a > 0 || b >= 0 {
                        wave.push((a, b));
                    }
                }
            }
        }
    }
    wave.sort_by_key(|&(a, b)| (a * a + b * b, a, b));
    let mut out = Vec::with_capacity(count);
    for (a, b) in wave {
        let k = [base * a as f64, base * b as f64];
        let funcs: Vec<fn(f64) -> f64> = if a == 0 && b == 0 { vec![|_| 1.0] } else { vec![f64::cos, f64::sin] };
        for f in funcs {
            if out.len() == count {
                return out;
            }
            let field = Field::from_fn(*grid, |x| {
                let arg: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
                f(arg)
            });
            let n = field.h1_norm();
            out.push(field.scaled(1.0 / n));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub radius: f64,
    pub modes: usize,
    pub n_starts: usize,
    pub horizon: f64,
    /// Relative distance to the sphere counted as "on the boundary".
    pub boundary_tol: f64,
    pub histogram_bins: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { radius: 1.0, modes: 8, n_starts: 16, horizon: 2.0, boundary_tol: 0.05, histogram_bins: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub lambda: f64,
    pub start_id: usize,
    /// Time spent inside the ball before exit, or the horizon.
    pub dwell: f64,
    pub exit_time: Option<f64>,
    pub flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    /// Per λ: `(λ, flagged start ids, dwell histogram)`.
    pub per_lambda: Vec<(f64, Vec<usize>, Vec<usize>)>,
}

/// Heuristic forward probe of `B(u_c, R_B)` restricted to low modes: an orbit
/// is flagged when it never leaves the ball and ends within `boundary_tol`
/// of its boundary.
pub fn isolating_probe(
    model: &Model,
    phase0: &HullPhase,
    center: &Field,
    lambdas: &[f64],
    omega: f64,
    opts: &ProbeOptions,
    control: &StepControl,
) -> Result<ProbeReport> {
    if opts.n_starts == 0 {
        return Err(Error::config("probe needs at least one start"));
    }
    if !(opts.radius > 0.0 && opts.horizon > 0.0) {
        return Err(Error::config("probe radius and horizon must be positive"));
    }
    control.validate()?;
    let basis = low_mode_basis(&model.grid, opts.modes.max(1));
    let d = basis.len();
    let mut starts = Vec::with_capacity(opts.n_starts);
    let mut index = 1u64;
    while starts.len() < opts.n_starts {
        let c: Vec<f64> = halton(index, d).iter().map(|h| 2.0 * h - 1.0).collect();
        index += 1;
        let r2: f64 = c.iter().map(|v| v * v).sum();
        if r2 > 1.0 {
            continue;
        }
        let mut u = center.clone();
        for (ci, e) in c.iter().zip(&basis) {
            u = u.add_scaled(opts.radius * ci, e)?;
        }
        starts.push(u);
    }
    let h_eff = control.effective_step(omega, model.max_frequency());
    let (n, h) = uniform_schedule(opts.horizon, h_eff);
    let mut rows = Vec::new();
    let mut per_lambda = Vec::new();
    for &lam in lambdas {
        let lambda = HomotopyParam::new(lam)?;
        let stepper = Stepper::new(model, lambda, omega)?;
        let lam_rows: Vec<ProbeRow> = starts
            .par_iter()
            .enumerate()
            .map(|(id, u0)| probe_orbit(&stepper, phase0, center, u0, n, h, opts, control, lam, id))
            .collect::<Result<_>>()?;
        let bins = opts.histogram_bins.max(1);
        let mut hist = vec![0usize; bins];
        for r in &lam_rows {
            let b = ((r.dwell / opts.horizon) * bins as f64).floor() as usize;
            hist[b.min(bins - 1)] += 1;
        }
        let flagged = lam_rows.iter().filter(|r| r.flag).map(|r| r.start_id).collect();
        per_lambda.push((lam, flagged, hist));
        rows.extend(lam_rows);
    }
    Ok(ProbeReport { rows, per_lambda })
}

#[allow(clippy::too_many_arguments)]
fn probe_orbit(
    stepper: &Stepper,
    phase0: &HullPhase,
    center: &Field,
    u0: &Field,
    n: usize,
    h: f64,
    opts: &ProbeOptions,
    control: &StepControl,
    lambda: f64,
    start_id: usize,
) -> Result<ProbeRow> {
    let guard = control.guard_for(u0);
    let mut state = ProcessState { phase: phase0.clone(), u: u0.clone(), t: 0.0 };
    let mut dist = state.u.h1_distance(center)?;
    for k in 1..=n {
        let t = k as f64 * h;
        match stepper.step(&state, h, guard) {
            Ok(next) => state = next,
            Err(Error::BlowUp { .. }) => {
                return Ok(ProbeRow { lambda, start_id, dwell: t, exit_time: Some(t), flag: false });
            }
            Err(e) => return Err(e),
        }
        dist = state.u.h1_distance(center)?;
        if dist > opts.radius {
            return Ok(ProbeRow { lambda, start_id, dwell: t, exit_time: Some(t), flag: false });
        }
    }
    let flag = (opts.radius - dist) <= opts.boundary_tol * opts.radius;
    Ok(ProbeRow { lambda, start_id, dwell: opts.horizon, exit_time: None, flag })
}
