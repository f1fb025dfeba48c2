//! Nonlinear process, averaged semiflow and skew-product orbits by Strang
//! splitting, with the blow-up guard and the tail-mass monitor.

use std::f64::consts::{SQRT_2, TAU};

use rayon::prelude::*;

use crate::coefficients::{EllipticCoefficients, HomotopyParam, NonlinearitySpec, ScalarProfile};
use crate::error::{Error, Result};
use crate::propagator::{linear_propagate, PropagatorContext};
use crate::spectral_field::{cutoff_field, Field, Grid, CUTOFF_SLOPE};
use crate::symbols::{family_frequencies, HullPhase, QuasiPeriodicSignal};

/// Node count above which the pointwise substep runs in parallel.
const PARALLEL_NODES: usize = 1 << 14;

/// The equation: grid, principal part and nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub grid: Grid,
    pub coeffs: EllipticCoefficients,
    pub nonlinearity: NonlinearitySpec,
}

impl Model {
    pub fn new(grid: Grid, coeffs: EllipticCoefficients, nonlinearity: NonlinearitySpec) -> Result<Self> {
        if grid.dim() != coeffs.dim() {
            return Err(Error::Dimension(format!(
                "grid is {}-dimensional, coefficients are {}-dimensional",
                grid.dim(),
                coeffs.dim()
            )));
        }
        for t in &nonlinearity.terms {
            t.space.validate()?;
        }
        Ok(Self { grid, coeffs, nonlinearity })
    }

    /// Frequencies of every signal in the model, sorted.
    pub fn frequencies(&self) -> Vec<f64> {
        family_frequencies(self.coeffs.signals().chain(self.nonlinearity.signals()))
    }

    /// `λ_max`, the fastest frequency in the model.
    pub fn max_frequency(&self) -> f64 {
        self.coeffs.max_frequency().max(self.nonlinearity.max_frequency())
    }

    /// Hull element with all angles zero.
    pub fn zero_phase(&self) -> HullPhase {
        HullPhase::zero(self.frequencies())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub h_max: f64,
    /// Substeps per fastest oscillation period `2π/(ω λ_max)`.
    pub osc_resolution: usize,
    /// Guard radius in H¹; defaults to `2‖u₀‖_{H¹} + guard_slack`.
    pub r_guard: Option<f64>,
    pub guard_slack: f64,
    /// Keep every `sample_every`-th step.
    pub sample_every: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { h_max: 0.01, osc_resolution: 16, r_guard: None, guard_slack: 10.0, sample_every: 1 }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return Err(Error::config(format!("h_max must be positive, got {}", self.h_max)));
        }
        if self.osc_resolution == 0 {
            return Err(Error::config("osc_resolution must be positive"));
        }
        if self.sample_every == 0 {
            return Err(Error::config("sample_every must be positive"));
        }
        if let Some(r) = self.r_guard {
            if !(r > 0.0) {
                return Err(Error::config(format!("r_guard must be positive, got {r}")));
            }
        }
        if !(self.guard_slack >= 0.0) {
            return Err(Error::config("guard_slack must be nonnegative"));
        }
        Ok(())
    }

    /// `min(h_max, 2π/(ω λ_max osc_resolution))`.
    pub fn effective_step(&self, omega: f64, max_frequency: f64) -> f64 {
        let rate = omega * max_frequency;
        if rate > 0.0 {
            self.h_max.min(TAU / (rate * self.osc_resolution as f64))
        } else {
            self.h_max
        }
    }

    pub fn guard_for(&self, u0: &Field) -> f64 {
        self.r_guard.unwrap_or(2.0 * u0.h1_norm() + self.guard_slack)
    }
}

/// Uniform schedule on `[0, length]` with steps no longer than `h_eff`.
pub fn uniform_schedule(length: f64, h_eff: f64) -> (usize, f64) {
    if length <= 0.0 {
        return (0, h_eff);
    }
    let n = ((length / h_eff) - 1e-9).ceil().max(1.0) as usize;
    (n, length / n as f64)
}

/// A point `(σ, u)` of the extended phase space at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessState {
    pub phase: HullPhase,
    pub u: Field,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub omega: f64,
    pub lambda: f64,
    pub step: f64,
    pub sample_every: usize,
    pub guard: f64,
    pub samples: Vec<ProcessState>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    /// State after the last step, sampled or not.
    pub last: ProcessState,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    /// Largest sampled H¹ norm.
    pub fn max_h1(&self) -> f64 {
        self.h1.iter().copied().fold(0.0, f64::max)
    }
}

/// `Φ(λ,·)` sampled on the grid nodes.
#[derive(Debug, Clone)]
struct NodeNonlinearity {
    signals: Vec<QuasiPeriodicSignal>,
    space: Vec<Vec<f64>>,
    psi: Vec<ScalarProfile>,
}

impl NodeNonlinearity {
    fn new(spec: &NonlinearitySpec, grid: &Grid) -> Self {
        Self {
            signals: spec.terms.iter().map(|t| t.signal.clone()).collect(),
            space: spec.terms.iter().map(|t| t.space.at_nodes(grid)).collect(),
            psi: spec.terms.iter().map(|t| t.psi).collect(),
        }
    }

    fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    fn rhs(&self, phase: &HullPhase, tau: f64, u: &[f64]) -> Result<Vec<f64>> {
        let s: Vec<f64> = self.signals.iter().map(|g| g.evaluate(phase, tau)).collect::<Result<_>>()?;
        let node = |j: usize, uj: f64| -> f64 {
            s.iter()
                .zip(&self.space)
                .zip(&self.psi)
                .fold(0.0, |acc, ((sm, g), psi)| acc + sm * g[j] * psi.value(uj))
        };
        Ok(if u.len() >= PARALLEL_NODES {
            u.par_iter().enumerate().map(|(j, &uj)| node(j, uj)).collect()
        } else {
            u.iter().enumerate().map(|(j, &uj)| node(j, uj)).collect()
        })
    }
}

/// One-step map for fixed `(λ, ω)`.
#[derive(Debug, Clone)]
pub struct Stepper {
    ctx: PropagatorContext,
    nonlinear: NodeNonlinearity,
    omega: f64,
    lambda: HomotopyParam,
}

impl Stepper {
    pub fn new(model: &Model, lambda: HomotopyParam, omega: f64) -> Result<Self> {
        let ctx = PropagatorContext::new(model.coeffs.clone(), lambda, omega, model.zero_phase())?;
        let phi = model.nonlinearity.homotopy(lambda);
        Ok(Self { ctx, nonlinear: NodeNonlinearity::new(&phi, &model.grid), omega, lambda })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> HomotopyParam {
        self.lambda
    }

    /// Strang step: exact linear flow over `[0, h/2]`, explicit midpoint on
    /// the pointwise ODE over `[0, h]`, exact linear flow over `[h/2, h]`.
    /// Times are relative to the state's hull element.
    pub fn step(&self, state: &ProcessState, h: f64, guard: f64) -> Result<ProcessState> {
        let ctx = self.ctx.with_phase(state.phase.clone());
        let half = 0.5 * h;
        let mut u = linear_propagate(&ctx, 0.0, half, &state.u)?;
        if !self.nonlinear.is_empty() {
            let u0 = u.values();
            let k1 = self.nonlinear.rhs(&state.phase, 0.0, u0)?;
            let mid: Vec<f64> = u0.iter().zip(&k1).map(|(a, k)| a + half * k).collect();
            let k2 = self.nonlinear.rhs(&state.phase, self.omega * half, &mid)?;
            let next: Vec<f64> = u0.iter().zip(&k2).map(|(a, k)| a + h * k).collect();
            let t_fail = state.t + h;
            u = Field::from_values(*u.grid(), next).map_err(|_| Error::BlowUp {
                time: t_fail,
                norm: f64::INFINITY,
                guard,
            })?;
        }
        let u = linear_propagate(&ctx, half, h, &u)?;
        let t = state.t + h;
        let norm = u.h1_norm();
        if !u.is_finite() || !(norm <= guard) {
            return Err(Error::BlowUp { time: t, norm, guard });
        }
        Ok(ProcessState { phase: state.phase.translate(self.omega, h), u, t })
    }

    /// Advances `state` by `n_steps` steps of size `h`, sampling every
    /// `sample_every` steps.
    pub fn run(&self, state: ProcessState, n_steps: usize, h: f64, sample_every: usize, guard: f64) -> Result<Trajectory> {
        let mut samples = Vec::with_capacity(n_steps / sample_every + 1);
        let mut l2 = Vec::with_capacity(samples.capacity());
        let mut h1 = Vec::with_capacity(samples.capacity());
        let s = state.t;
        l2.push(state.u.l2_norm());
        h1.push(state.u.h1_norm());
        samples.push(state.clone());
        let mut cur = state;
        for k in 1..=n_steps {
            let mut next = self.step(&cur, h, guard)?;
            // pin the clock to the schedule so sample times do not drift
            next.t = s + k as f64 * h;
            cur = next;
            if k % sample_every == 0 {
                l2.push(cur.u.l2_norm());
                h1.push(cur.u.h1_norm());
                samples.push(cur.clone());
            }
        }
        Ok(Trajectory {
            omega: self.omega,
            lambda: self.lambda.value(),
            step: h,
            sample_every,
            guard,
            samples,
            l2,
            h1,
            last: cur,
        })
    }
}

/// Single step with a freshly built stepper.
pub fn step(model: &Model, state: &ProcessState, lambda: HomotopyParam, omega: f64, h: f64, guard: f64) -> Result<ProcessState> {
    Stepper::new(model, lambda, omega)?.step(state, h, guard)
}

/// `Π^σ_{λ,ω}(t, s)u_s` sampled on a uniform schedule; `phase0` is the hull
/// element at time zero.
#[allow(clippy::too_many_arguments)]
pub fn solve_process(
    model: &Model,
    phase0: &HullPhase,
    lambda: HomotopyParam,
    omega: f64,
    s: f64,
    t_end: f64,
    u_s: &Field,
    control: &StepControl,
) -> Result<Trajectory> {
    if t_end < s {
        return Err(Error::Order { s, t: t_end });
    }
    control.validate()?;
    let h_eff = control.effective_step(omega, model.max_frequency());
    let (n, h) = uniform_schedule(t_end - s, h_eff);
    let state = ProcessState { phase: phase0.translate(omega, s), u: u_s.clone(), t: s };
    Stepper::new(model, lambda, omega)?.run(state, n, h, control.sample_every, control.guard_for(u_s))
}

/// Averaged semiflow `π(t)u₀` on `[0, t_end]`; only `h_max` limits the step.
pub fn solve_averaged(model: &Model, u0: &Field, t_end: f64, control: &StepControl) -> Result<Trajectory> {
    if t_end < 0.0 {
        return Err(Error::Order { s: 0.0, t: t_end });
    }
    control.validate()?;
    let (n, h) = uniform_schedule(t_end, control.h_max);
    solve_averaged_with_step(model, u0, n, h, control)
}

/// Averaged run on an explicit schedule of `n` steps of size `h`.
pub fn solve_averaged_with_step(model: &Model, u0: &Field, n: usize, h: f64, control: &StepControl) -> Result<Trajectory> {
    let state = ProcessState { phase: model.zero_phase(), u: u0.clone(), t: 0.0 };
    let stepper = Stepper::new(model, HomotopyParam::AVERAGED, 1.0)?;
    stepper.run(state, n, h, control.sample_every, control.guard_for(u0))
}

/// `‖Π^σ(t+h, s+h)u − Π^{T_ω(h)σ}(t, s)u‖_{H¹}`; both runs share one schedule.
#[allow(clippy::too_many_arguments)]
pub fn check_translation_identity(
    model: &Model,
    phase0: &HullPhase,
    lambda: HomotopyParam,
    omega: f64,
    s: f64,
    t: f64,
    h_shift: f64,
    u: &Field,
    control: &StepControl,
) -> Result<f64> {
    if t < s {
        return Err(Error::Order { s, t });
    }
    let shifted = solve_process(model, phase0, lambda, omega, s + h_shift, t + h_shift, u, control)?;
    let moved = phase0.translate(omega, h_shift);
    let direct = solve_process(model, &moved, lambda, omega, s, t, u, control)?;
    shifted.last.u.h1_distance(&direct.last.u)
}

/// Skew-product orbit `P_{λ,ω}(t)(σ, u)` from `state0`, whose phase is the
/// hull element at `state0.t`.
pub fn skew_orbit(
    model: &Model,
    state0: &ProcessState,
    lambda: HomotopyParam,
    omega: f64,
    t_end: f64,
    control: &StepControl,
) -> Result<Trajectory> {
    if t_end < state0.t {
        return Err(Error::Order { s: state0.t, t: t_end });
    }
    control.validate()?;
    let h_eff = control.effective_step(omega, model.max_frequency());
    let (n, h) = uniform_schedule(t_end - state0.t, h_eff);
    let guard = control.guard_for(&state0.u);
    Stepper::new(model, lambda, omega)?.run(state0.clone(), n, h, control.sample_every, guard)
}

/// Tail bound data for one radius `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCheck {
    pub k: f64,
    pub eta: f64,
    pub m_k: f64,
    /// `(t, ∫θ_k|u|², bound)` per sample.
    pub rows: Vec<(f64, f64, f64)>,
    pub violations: usize,
}

impl TailCheck {
    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|(_, l, b)| b - l).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    /// `max_t ‖u(t)‖_{H¹}` over the samples.
    pub radius: f64,
    pub nu: f64,
    pub nu0: f64,
    /// Sup-norm embedding constant of the grid.
    pub c_inf: f64,
    /// Interpolation constant `C_∞^{1−2/r}` with `r = q p′`.
    pub c_s: f64,
    pub checks: Vec<TailCheck>,
}

impl TailReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn header(&self) -> String {
        format!(
            "R = {:.6e}, nu = {}, nu0 = {}, D = {CUTOFF_SLOPE}, C_S = {:.6e} (measured grid sup-embedding constant {:.6e})",
            self.radius, self.nu, self.nu0, self.c_s, self.c_inf
        )
    }
}

/// `η_k = (1/2ν)[4√2 D R²/(ν₀k) + 2 C_S^q R^q m_k^{1/p} + 2 m_k]`.
#[allow(clippy::too_many_arguments)]
pub fn tail_eta(nu: f64, nu0: f64, radius: f64, k: f64, q: f64, p: f64, c_s: f64, m_k: f64) -> f64 {
    let d_term = 4.0 * SQRT_2 * CUTOFF_SLOPE * radius * radius / (nu0 * k);
    let b_term = 2.0 * c_s.powf(q) * radius.powf(q) * m_k.powf(1.0 / p);
    (d_term + b_term + 2.0 * m_k) / (2.0 * nu)
}

/// Checks `∫θ_k|u(t)|² ≤ R²e^{−2ν(t−s)} + η_k` at every sample. Violations are
/// diagnostics, not errors.
pub fn monitor_tail(model: &Model, traj: &Trajectory, nu: f64, ks: &[f64]) -> Result<TailReport> {
    if !(nu > 0.0) {
        return Err(Error::config(format!("tail monitor needs nu > 0, got {nu}")));
    }
    let grid = &model.grid;
    let (q, p) = match &model.nonlinearity.dissipation {
        Some(d) => (d.q, d.p),
        None => (2.0, 1.0),
    };
    let m: Vec<f64> = if model.nonlinearity.dissipation.is_some() {
        model.nonlinearity.tail_decay_sequence(grid, ks)?
    } else {
        vec![0.0; ks.len()]
    };
    let c_inf = grid.sup_embedding_constant();
    let r = if p == 1.0 { f64::INFINITY } else { q * p / (p - 1.0) };
    let c_s = if r.is_infinite() { c_inf } else { c_inf.powf(1.0 - 2.0 / r) };
    let radius = traj.max_h1();
    let nu0 = model.coeffs.nu0();
    let s = traj.start_time();
    let mut checks = Vec::with_capacity(ks.len());
    for (&k, &m_k) in ks.iter().zip(&m) {
        let theta = cutoff_field(grid, k)?;
        let eta = tail_eta(nu, nu0, radius, k, q, p, c_s, m_k);
        let mut rows = Vec::with_capacity(traj.samples.len());
        let mut violations = 0;
        for st in &traj.samples {
            let lhs = st.u.weighted_mass(&theta);
            let bound = radius * radius * (-2.0 * nu * (st.t - s)).exp() + eta;
            if !(lhs <= bound) {
                violations += 1;
            }
            rows.push((st.t, lhs, bound));
        }
        checks.push(TailCheck { k, eta, m_k, rows, violations });
    }
    Ok(TailReport { radius, nu, nu0, c_inf, c_s, checks })
}

/// Empirical absorbing-ball scale `‖C‖_{L¹}/(ν − sup B)` for `q = 2`, where
/// `B`, `C` are the hull-uniform envelopes of `b`, `c`. `None` when the data
/// do not give a finite value.
pub fn absorbing_ball_estimate(model: &Model) -> Option<f64> {
    let d = model.nonlinearity.dissipation.as_ref()?;
    if d.q != 2.0 {
        return None;
    }
    let dim = model.grid.dim();
    let nodes = model.grid.nodes();
    let b_sup = nodes.iter().map(|x| d.b.envelope(&x[..dim])).fold(0.0, f64::max);
    let c_l1: f64 = nodes.iter().map(|x| d.c.envelope(&x[..dim])).sum::<f64>() * model.grid.cell_volume();
    (d.nu > b_sup).then(|| c_l1 / (d.nu - b_sup))
}
