//! Principal-part coefficients, structured nonlinearities and the lattice
//! validators for ellipticity, growth, dissipativeness and tail decay.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};
use crate::sampling::{halton, linspace};
use crate::spectral_field::Grid;
use crate::symbols::{family_frequencies, HullPhase, QuasiPeriodicSignal};

/// Residual slack accepted by every lattice check.
pub const CHECK_TOL: f64 = 1e-12;

/// Violations listed in a report beyond this count are only counted.
const MAX_LISTED_VIOLATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialKind {
    Gaussian,
    Sech,
    Bump,
    Constant,
}

/// `g(x) = amplitude · base(|x − center| / width)^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialProfile {
    pub kind: SpatialKind,
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    pub power: f64,
}

impl SpatialProfile {
    pub fn new(kind: SpatialKind) -> Self {
        Self { kind, amplitude: 1.0, width: 1.0, center: [0.0; 2], power: 1.0 }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self { amplitude, ..Self::new(SpatialKind::Constant) }
    }

    pub fn gaussian(width: f64) -> Self {
        Self { width, ..Self::new(SpatialKind::Gaussian) }
    }

    pub fn sech(width: f64) -> Self {
        Self { width, ..Self::new(SpatialKind::Sech) }
    }

    pub fn sech2(width: f64) -> Self {
        Self { width, power: 2.0, ..Self::new(SpatialKind::Sech) }
    }

    pub fn bump(radius: f64) -> Self {
        Self { width: radius, ..Self::new(SpatialKind::Bump) }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::config("profile amplitude must be finite"));
        }
        if self.kind != SpatialKind::Constant && !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config(format!("profile width must be positive, got {}", self.width)));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::config(format!("profile power must be positive, got {}", self.power)));
        }
        Ok(())
    }

    pub fn is_decaying(&self) -> bool {
        self.kind != SpatialKind::Constant || self.amplitude == 0.0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.kind == SpatialKind::Constant {
            return self.amplitude;
        }
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        let r = r2.sqrt() / self.width;
        let base = match self.kind {
            SpatialKind::Gaussian => (-r * r).exp(),
            SpatialKind::Sech => 1.0 / r.cosh(),
            SpatialKind::Bump => {
                if r < 1.0 {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
            SpatialKind::Constant => unreachable!(),
        };
        if self.power == 1.0 {
            self.amplitude * base
        } else {
            self.amplitude * base.powf(self.power)
        }
    }

    /// `|g|^e` as a profile of the same kind.
    pub fn abs_pow(&self, e: f64) -> Self {
        Self {
            amplitude: self.amplitude.abs().powf(e),
            power: if self.kind == SpatialKind::Constant { 1.0 } else { self.power * e },
            ..*self
        }
    }

    pub fn at_nodes(&self, grid: &Grid) -> Vec<f64> {
        let d = grid.dim();
        grid.nodes().iter().map(|p| self.eval(&p[..d])).collect()
    }
}

impl fmt::Display for SpatialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            SpatialKind::Gaussian => "gaussian",
            SpatialKind::Sech => "sech",
            SpatialKind::Bump => "bump",
            SpatialKind::Constant => "constant",
        };
        if self.kind == SpatialKind::Constant {
            return write!(f, "constant(amplitude={})", self.amplitude);
        }
        write!(
            f,
            "{name}(width={}, amplitude={}, power={}, center={}:{})",
            self.width, self.amplitude, self.power, self.center[0], self.center[1]
        )
    }
}

/// Catalog of scalar nonlinear profiles `ψ(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarProfile {
    Identity,
    Square,
    Cube,
    /// `u / (1 + u²)`
    Rational,
    Tanh,
    /// `sech²(u)`
    Sech2,
    One,
}

impl ScalarProfile {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarProfile::Identity => "identity",
            ScalarProfile::Square => "square",
            ScalarProfile::Cube => "cube",
            ScalarProfile::Rational => "rational",
            ScalarProfile::Tanh => "tanh",
            ScalarProfile::Sech2 => "sech2",
            ScalarProfile::One => "one",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "identity" | "u" => ScalarProfile::Identity,
            "square" | "u2" => ScalarProfile::Square,
            "cube" | "u3" => ScalarProfile::Cube,
            "rational" => ScalarProfile::Rational,
            "tanh" => ScalarProfile::Tanh,
            "sech2" => ScalarProfile::Sech2,
            "one" | "constant" => ScalarProfile::One,
            _ => return None,
        })
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            ScalarProfile::Identity => u,
            ScalarProfile::Square => u * u,
            ScalarProfile::Cube => u * u * u,
            ScalarProfile::Rational => u / (1.0 + u * u),
            ScalarProfile::Tanh => u.tanh(),
            ScalarProfile::Sech2 => {
                let c = u.cosh();
                1.0 / (c * c)
            }
            ScalarProfile::One => 1.0,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            ScalarProfile::Identity => 1.0,
            ScalarProfile::Square => 2.0 * u,
            ScalarProfile::Cube => 3.0 * u * u,
            ScalarProfile::Rational => {
                let d = 1.0 + u * u;
                (1.0 - u * u) / (d * d)
            }
            ScalarProfile::Tanh => {
                let c = u.cosh();
                1.0 / (c * c)
            }
            ScalarProfile::Sech2 => {
                let c = u.cosh();
                -2.0 * u.tanh() / (c * c)
            }
            ScalarProfile::One => 0.0,
        }
    }

    /// `lim_{|u|→∞} ψ(u)/u` when it exists.
    pub fn asymptotic_slope(&self) -> Option<f64> {
        match self {
            ScalarProfile::Identity => Some(1.0),
            ScalarProfile::Square | ScalarProfile::Cube => None,
            ScalarProfile::Rational | ScalarProfile::Tanh | ScalarProfile::Sech2 | ScalarProfile::One => {
                Some(0.0)
            }
        }
    }

    /// `sup_u |ψ(u)|` for the bounded members of the catalog.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            ScalarProfile::Rational => Some(0.5),
            ScalarProfile::Tanh | ScalarProfile::Sech2 | ScalarProfile::One => Some(1.0),
            _ => None,
        }
    }
}

/// Homotopy parameter `λ ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HomotopyParam(f64);

impl HomotopyParam {
    pub const AVERAGED: HomotopyParam = HomotopyParam(0.0);
    pub const FULL: HomotopyParam = HomotopyParam(1.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::config(format!("homotopy parameter {lambda} outside [0, 1]")));
        }
        Ok(Self(lambda))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub point: String,
    pub residual: f64,
}

/// Outcome of one lattice check. A sample passes when its residual is `≤ CHECK_TOL`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub check: String,
    pub samples: usize,
    pub worst_residual: f64,
    pub worst_point: String,
    pub violation_count: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            samples: 0,
            worst_residual: f64::NEG_INFINITY,
            worst_point: String::new(),
            violation_count: 0,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, residual: f64, point: impl FnOnce() -> String) {
        self.samples += 1;
        let bad = !(residual <= CHECK_TOL);
        if bad || residual > self.worst_residual {
            let p = point();
            if residual > self.worst_residual || residual.is_nan() {
                self.worst_residual = if residual.is_nan() { f64::INFINITY } else { residual };
                self.worst_point = p.clone();
            }
            if bad {
                self.violation_count += 1;
                if self.violations.len() < MAX_LISTED_VIOLATIONS {
                    self.violations.push(Violation { point: p, residual });
                }
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    /// `−worst_residual`: the slack of the tightest sample.
    pub fn margin(&self) -> f64 {
        -self.worst_residual
    }
}

/// Symmetric `N×N` matrix of signals, stored as the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticCoefficients {
    dim: usize,
    upper: Vec<QuasiPeriodicSignal>,
    nu0: f64,
}

impl EllipticCoefficients {
    /// `upper` lists `a11` (1D) or `a11, a12, a22` (2D).
    pub fn new(dim: usize, upper: Vec<QuasiPeriodicSignal>, nu0: f64) -> Result<Self> {
        let need = dim * (dim + 1) / 2;
        if !(dim == 1 || dim == 2) || upper.len() != need {
            return Err(Error::Dimension(format!(
                "{dim}-dimensional coefficients need {need} upper-triangular entries, got {}",
                upper.len()
            )));
        }
        if !(nu0 > 0.0 && nu0 <= 1.0) {
            return Err(Error::config(format!("nu0 must lie in (0, 1], got {nu0}")));
        }
        Ok(Self { dim, upper, nu0 })
    }

    pub fn identity(dim: usize) -> Self {
        let upper = match dim {
            1 => vec![QuasiPeriodicSignal::constant(1.0)],
            _ => vec![
                QuasiPeriodicSignal::constant(1.0),
                QuasiPeriodicSignal::constant(0.0),
                QuasiPeriodicSignal::constant(1.0),
            ],
        };
        Self { dim, upper, nu0: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    pub fn entry(&self, i: usize, j: usize) -> &QuasiPeriodicSignal {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        // row-major upper triangle
        let idx = a * self.dim - a * (a + 1) / 2 + b;
        &self.upper[idx]
    }

    pub fn signals(&self) -> impl Iterator<Item = &QuasiPeriodicSignal> {
        self.upper.iter()
    }

    pub fn max_frequency(&self) -> f64 {
        self.upper.iter().map(|s| s.max_frequency()).fold(0.0, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.upper.iter().all(|s| s.is_constant())
    }

    /// `α(λ, ·) = λα + (1−λ)ā`.
    pub fn homotopy(&self, lambda: HomotopyParam) -> Self {
        Self {
            dim: self.dim,
            upper: self.upper.iter().map(|s| s.homotopy(lambda.value())).collect(),
            nu0: self.nu0,
        }
    }

    pub fn averaged(&self) -> Self {
        self.homotopy(HomotopyParam::AVERAGED)
    }

    /// Upper-triangle means `[ā11, ā12, ā22]` (unused slots zero).
    pub fn mean_upper(&self) -> [f64; 3] {
        match self.dim {
            1 => [self.upper[0].mean(), 0.0, 0.0],
            _ => [self.upper[0].mean(), self.upper[1].mean(), self.upper[2].mean()],
        }
    }

    /// Upper-triangle values at `τ` for the hull element `phase`.
    pub fn upper_at(&self, phase: &HullPhase, tau: f64) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (o, s) in out.iter_mut().zip(&self.upper) {
            *o = s.evaluate(phase, tau)?;
        }
        if self.dim == 1 {
            out[1] = 0.0;
        }
        Ok(out)
    }

    /// Exact `∫_s^t α_ij(λ, ωp) dp` for the upper triangle, given the
    /// hull element at time zero.
    pub fn integrated_upper(&self, phase: &HullPhase, omega: f64, s: f64, t: f64) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (o, sig) in out.iter_mut().zip(&self.upper) {
            *o = sig.mean() * (t - s) + sig.oscillatory_increment(phase, omega * s, omega * t)? / omega;
        }
        Ok(out)
    }

    /// `max_ij Σ_k λ_k(|a_k| + |b_k|)`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.upper.iter().map(|s| s.lipschitz_bound()).fold(0.0, f64::max)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        family_frequencies(self.upper.iter())
    }

    /// Checks `ν₀|ξ|² ≤ ξᵀA(τ)ξ ≤ ν₀⁻¹|ξ|²` on unit `ξ` over a lattice in
    /// `(τ, ξ, hull phase)`.
    pub fn validate_ellipticity(
        &self,
        base: &HullPhase,
        tau_samples: usize,
        xi_samples: usize,
    ) -> Result<ValidationReport> {
        let mut report = ValidationReport::new("ellipticity");
        let tau_samples = tau_samples.max(1);
        let xi_samples = xi_samples.max(1);
        let min_freq = base.frequencies().iter().copied().fold(f64::INFINITY, f64::min);
        let period = if min_freq.is_finite() { TAU / min_freq } else { 0.0 };
        let d = base.dim();
        let directions: Vec<[f64; 2]> = match self.dim {
            1 => vec![[1.0, 0.0]],
            _ => (0..xi_samples)
                .map(|j| {
                    let th = std::f64::consts::PI * j as f64 / xi_samples as f64;
                    [th.cos(), th.sin()]
                })
                .collect(),
        };
        for i in 0..tau_samples {
            let tau = period * i as f64 / tau_samples as f64;
            let phase = if d >= 2 {
                let offs: Vec<f64> = halton(i as u64 + 1, d).iter().map(|h| TAU * h).collect();
                base.shifted(&offs)?
            } else {
                base.clone()
            };
            let a = self.upper_at(&phase, tau)?;
            for xi in &directions {
                let q = a[0] * xi[0] * xi[0] + 2.0 * a[1] * xi[0] * xi[1] + a[2] * xi[1] * xi[1];
                let residual = (self.nu0 - q).max(q - 1.0 / self.nu0);
                report.record(residual, || {
                    format!("tau={tau:.6};xi={:.6}:{:.6};phase={:?};q={q:.6}", xi[0], xi[1], phase.angles())
                });
            }
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearTerm {
    pub signal: QuasiPeriodicSignal,
    pub space: SpatialProfile,
    pub psi: ScalarProfile,
}

impl NonlinearTerm {
    pub fn new(signal: QuasiPeriodicSignal, space: SpatialProfile, psi: ScalarProfile) -> Self {
        Self { signal, space, psi }
    }
}

/// `Σ s(τ) g(x)`, used for the `b` and `c` data of the dissipativeness bound.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpaceTimeProfile {
    pub terms: Vec<(QuasiPeriodicSignal, SpatialProfile)>,
}

impl SpaceTimeProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, signal_values: &[f64], x: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(signal_values)
            .map(|((_, g), s)| s * g.eval(x))
            .sum()
    }

    pub fn signal_values(&self, phase: &HullPhase, tau: f64) -> Result<Vec<f64>> {
        self.terms.iter().map(|(s, _)| s.evaluate(phase, tau)).collect()
    }

    /// Pointwise bound `Σ sup|s|·|g(x)|`, uniform over the hull.
    pub fn envelope(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(s, g)| s.sup_abs() * g.eval(x).abs()).sum()
    }

    fn map_signals(&self, f: impl Fn(&QuasiPeriodicSignal) -> QuasiPeriodicSignal) -> Self {
        Self { terms: self.terms.iter().map(|(s, g)| (f(s), *g)).collect() }
    }
}

/// Data of `F(τ,x,u)u ≤ −ν|u|² + b(τ,x)|u|^q + c(τ,x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipation {
    pub nu: f64,
    pub q: f64,
    /// Integrability exponent of `b`.
    pub p: f64,
    pub b: SpaceTimeProfile,
    pub c: SpaceTimeProfile,
}

impl Dissipation {
    pub fn linear(nu: f64) -> Self {
        Self { nu, q: 2.0, p: 1.0, b: SpaceTimeProfile::zero(), c: SpaceTimeProfile::zero() }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(Error::config(format!("dissipation nu must be positive, got {}", self.nu)));
        }
        if !(self.q >= 2.0 && self.q.is_finite()) {
            return Err(Error::config(format!("dissipation q must be >= 2 (N = {dim}), got {}", self.q)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::config(format!("dissipation p must be finite and >= 1, got {}", self.p)));
        }
        Ok(())
    }
}

/// Growth bound `|F'_u| ≤ C(1 + |u|^β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub c: f64,
    pub beta: f64,
}

/// Sampling description for the `(τ, x, u)` lattice checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    /// Hull-phase samples (τ folded into the phase).
    pub phase_samples: usize,
    /// Spatial sample points.
    pub points: Vec<[f64; 2]>,
    pub u_max: f64,
    pub u_samples: usize,
}

impl Lattice {
    /// Every `stride`-th grid node.
    pub fn on_grid(grid: &Grid, stride: usize, phase_samples: usize, u_max: f64, u_samples: usize) -> Self {
        let points = grid.nodes().into_iter().step_by(stride.max(1)).collect();
        Self { phase_samples, points, u_max, u_samples }
    }

    fn phases(&self, base: &HullPhase) -> Result<Vec<HullPhase>> {
        let d = base.dim();
        let mut out = vec![base.clone()];
        for i in 1..self.phase_samples.max(1) {
            let offs: Vec<f64> = halton(i as u64, d).iter().map(|h| TAU * h).collect();
            out.push(base.shifted(&offs)?);
        }
        Ok(out)
    }

    fn u_values(&self) -> Vec<f64> {
        linspace(-self.u_max, self.u_max, self.u_samples.max(2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    pub terms: Vec<NonlinearTerm>,
    pub dissipation: Option<Dissipation>,
    pub growth: Option<Growth>,
}

impl NonlinearitySpec {
    pub fn new(terms: Vec<NonlinearTerm>) -> Self {
        Self { terms, dissipation: None, growth: None }
    }

    pub fn zero() -> Self {
        Self::new(Vec::new())
    }

    /// `F = −κu`.
    pub fn linear_damping(kappa: f64) -> Self {
        Self {
            terms: vec![NonlinearTerm::new(
                QuasiPeriodicSignal::constant(-kappa),
                SpatialProfile::constant(1.0),
                ScalarProfile::Identity,
            )],
            dissipation: Some(Dissipation::linear(kappa)),
            growth: Some(Growth { c: kappa, beta: 0.0 }),
        }
    }

    pub fn with_dissipation(mut self, d: Dissipation) -> Self {
        self.dissipation = Some(d);
        self
    }

    pub fn with_growth(mut self, g: Growth) -> Self {
        self.growth = Some(g);
        self
    }

    pub fn signals(&self) -> impl Iterator<Item = &QuasiPeriodicSignal> {
        let d = self.dissipation.iter().flat_map(|d| d.b.terms.iter().chain(d.c.terms.iter()).map(|(s, _)| s));
        self.terms.iter().map(|t| &t.signal).chain(d)
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.signal.max_frequency()).fold(0.0, f64::max)
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.signal.is_constant())
    }

    pub fn signal_values(&self, phase: &HullPhase, tau: f64) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.signal.evaluate(phase, tau)).collect()
    }

    pub fn eval_with(&self, signal_values: &[f64], x: &[f64], u: f64) -> f64 {
        self.terms
            .iter()
            .zip(signal_values)
            .map(|(t, s)| s * t.space.eval(x) * t.psi.value(u))
            .sum()
    }

    pub fn evaluate(&self, phase: &HullPhase, tau: f64, x: &[f64], u: f64) -> Result<f64> {
        Ok(self.eval_with(&self.signal_values(phase, tau)?, x, u))
    }

    pub fn derivative_with(&self, signal_values: &[f64], x: &[f64], u: f64) -> f64 {
        self.terms
            .iter()
            .zip(signal_values)
            .map(|(t, s)| s * t.space.eval(x) * t.psi.derivative(u))
            .sum()
    }

    fn map_signals(&self, f: impl Fn(&QuasiPeriodicSignal) -> QuasiPeriodicSignal) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| NonlinearTerm::new(f(&t.signal), t.space, t.psi))
                .collect(),
            dissipation: self.dissipation.as_ref().map(|d| Dissipation {
                b: d.b.map_signals(&f),
                c: d.c.map_signals(&f),
                ..d.clone()
            }),
            growth: self.growth,
        }
    }

    /// The autonomous mean `F̄`; terms whose mean vanishes are dropped.
    pub fn average(&self) -> Self {
        let mut out = self.map_signals(|s| s.averaged());
        out.terms.retain(|t| t.signal.mean() != 0.0);
        if let Some(d) = out.dissipation.as_mut() {
            d.b.terms.retain(|(s, _)| s.mean() != 0.0);
            d.c.terms.retain(|(s, _)| s.mean() != 0.0);
        }
        out
    }

    /// `Φ(λ,·) = λF + (1−λ)F̄`; `λ = 0` returns exactly [`Self::average`].
    pub fn homotopy(&self, lambda: HomotopyParam) -> Self {
        if lambda.value() == 0.0 {
            self.average()
        } else {
            self.map_signals(|s| s.homotopy(lambda.value()))
        }
    }

    /// Residual of `F u + ν u² − b|u|^q − c` on the lattice.
    pub fn validate_dissipativeness(&self, base: &HullPhase, lattice: &Lattice) -> Result<ValidationReport> {
        let d = self
            .dissipation
            .as_ref()
            .ok_or_else(|| Error::config("dissipation data missing"))?;
        let mut report = ValidationReport::new("dissipativeness");
        let us = lattice.u_values();
        for phase in lattice.phases(base)? {
            let sv = self.signal_values(&phase, 0.0)?;
            let bv = d.b.signal_values(&phase, 0.0)?;
            let cv = d.c.signal_values(&phase, 0.0)?;
            for p in &lattice.points {
                let b = d.b.eval(&bv, p);
                let c = d.c.eval(&cv, p);
                for &u in &us {
                    let f = self.eval_with(&sv, p, u);
                    let residual = f * u + d.nu * u * u - b * u.abs().powf(d.q) - c;
                    report.record(residual, || {
                        format!("phase={:?};x={:.6}:{:.6};u={u:.6}", phase.angles(), p[0], p[1])
                    });
                }
            }
        }
        Ok(report)
    }

    /// Residual of `|F'_u| − C(1 + |u|^β)` on the lattice.
    pub fn validate_growth(&self, base: &HullPhase, lattice: &Lattice) -> Result<ValidationReport> {
        let g = self.growth.ok_or_else(|| Error::config("growth data missing"))?;
        let mut report = ValidationReport::new("growth");
        let us = lattice.u_values();
        for phase in lattice.phases(base)? {
            let sv = self.signal_values(&phase, 0.0)?;
            for p in &lattice.points {
                for &u in &us {
                    let residual = self.derivative_with(&sv, p, u).abs() - g.c * (1.0 + u.abs().powf(g.beta));
                    report.record(residual, || {
                        format!("phase={:?};x={:.6}:{:.6};u={u:.6}", phase.angles(), p[0], p[1])
                    });
                }
            }
        }
        Ok(report)
    }

    /// `m_k = ∫_{|x|≥k} B^p + ∫_{|x|≥k} C`, with `B`, `C` the hull-uniform
    /// envelopes of `b`, `c`, by quadrature on `grid`.
    pub fn tail_decay_sequence(&self, grid: &Grid, ks: &[f64]) -> Result<Vec<f64>> {
        let d = self
            .dissipation
            .as_ref()
            .ok_or_else(|| Error::config("dissipation data missing"))?;
        for (_, g) in d.b.terms.iter().chain(&d.c.terms) {
            if !g.is_decaying() {
                return Err(Error::Hypothesis(format!(
                    "dissipation profile {g} does not decay; tail integrals diverge"
                )));
            }
        }
        let dim = grid.dim();
        let nodes = grid.nodes();
        let integrand: Vec<f64> = nodes
            .iter()
            .map(|x| d.b.envelope(&x[..dim]).powf(d.p) + d.c.envelope(&x[..dim]))
            .collect();
        ks.iter()
            .map(|&k| {
                if !(k >= 0.0) {
                    return Err(Error::Domain(format!("tail radius {k} must be nonnegative")));
                }
                Ok(grid.tail_integral(&integrand, k))
            })
            .collect()
    }

    /// Synthesises `(ν, q = 2, b, c)` through a Young split with parameter `ε`:
    /// bounded terms contribute `|s g ψ(u) u| ≤ (ε/2)u² + …/(2ε)`.
    pub fn young_split(&self, epsilon: f64) -> Result<Dissipation> {
        if !(epsilon > 0.0) {
            return Err(Error::config("young epsilon must be positive"));
        }
        let mut kappa = 0.0;
        let mut b = SpaceTimeProfile::zero();
        let mut bounded: Vec<(f64, SpatialProfile)> = Vec::new();
        for t in &self.terms {
            let s = &t.signal;
            let inf = 2.0 * s.mean() - s.sup();
            let amp = t.space.amplitude;
            // sup over τ of s(τ)·g(x) divided by |g(x)|
            let worst = if amp >= 0.0 { s.sup() } else { -inf };
            match t.psi {
                ScalarProfile::Identity => {
                    if t.space.kind == SpatialKind::Constant {
                        kappa -= worst * amp.abs();
                    } else if worst > 0.0 {
                        b.terms.push((
                            QuasiPeriodicSignal::constant(worst),
                            SpatialProfile { amplitude: amp.abs(), ..t.space },
                        ));
                    }
                }
                ScalarProfile::Cube => {
                    if worst > 0.0 {
                        return Err(Error::Hypothesis(
                            "a cubic term with positive part cannot be absorbed by a Young split".into(),
                        ));
                    }
                }
                ScalarProfile::Square => {
                    return Err(Error::Hypothesis(
                        "quadratic terms need explicit dissipation data".into(),
                    ));
                }
                psi => {
                    let bound = psi.sup_abs().expect("bounded profile");
                    let a = s.sup_abs() * bound * amp.abs();
                    if a > 0.0 {
                        bounded.push((a, SpatialProfile { amplitude: 1.0, ..t.space }));
                    }
                }
            }
        }
        let count = bounded.len() as f64;
        let mut c = SpaceTimeProfile::zero();
        for (a, g) in &bounded {
            // (Σ a_m g_m)² ≤ M Σ a_m² g_m²
            let coeff = count * a * a / (2.0 * epsilon);
            c.terms.push((QuasiPeriodicSignal::constant(coeff), g.abs_pow(2.0)));
        }
        let nu = if bounded.is_empty() { kappa } else { kappa - 0.5 * epsilon };
        if !(nu > 0.0) {
            return Err(Error::Hypothesis(format!(
                "Young split leaves nonpositive dissipation rate nu = {nu}"
            )));
        }
        Ok(Dissipation { nu, q: 2.0, p: 1.0, b, c })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::Mode;
    use std::f64::consts::PI;

    fn cos1(mean: f64, amp: f64) -> QuasiPeriodicSignal {
        QuasiPeriodicSignal::single(mean, 1.0, amp, 0.0).unwrap()
    }

    #[test]
    fn identity_coefficients_pass_with_zero_margin() {
        let a = EllipticCoefficients::identity(2);
        let r = a.validate_ellipticity(&HullPhase::zero(vec![]), 8, 8).unwrap();
        assert!(r.passed());
        assert_eq!(r.margin(), 0.0);
    }

    #[test]
    fn ellipticity_band_examples() {
        let a = EllipticCoefficients::new(1, vec![cos1(1.0, 0.5)], 0.5).unwrap();
        let ph = HullPhase::zero(a.frequencies());
        assert!(a.validate_ellipticity(&ph, 64, 1).unwrap().passed());

        let a = EllipticCoefficients::new(1, vec![cos1(1.0, 0.5)], 0.6).unwrap();
        let r = a.validate_ellipticity(&ph, 64, 1).unwrap();
        assert!(!r.passed());
        // worst sample sits at τ ≈ π where a = 0.5
        assert!((r.worst_residual - 0.1).abs() < 1e-12);
        assert!(r.worst_point.starts_with("tau=3.14159"));
    }

    #[test]
    fn homotopy_preserves_ellipticity() {
        let a = EllipticCoefficients::new(
            2,
            vec![cos1(1.0, 0.4), QuasiPeriodicSignal::single(0.0, 2f64.sqrt(), 0.1, 0.1).unwrap(), cos1(1.2, 0.3)],
            0.4,
        )
        .unwrap();
        let ph = HullPhase::zero(a.frequencies());
        for lam in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let h = a.homotopy(HomotopyParam::new(lam).unwrap());
            assert!(h.validate_ellipticity(&ph, 64, 16).unwrap().passed(), "lambda {lam}");
        }
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(EllipticCoefficients::identity(1).lipschitz_constant(), 0.0);
        let a = EllipticCoefficients::new(
            1,
            vec![QuasiPeriodicSignal::single(1.0, 2.0, 0.5, 0.0).unwrap()],
            0.5,
        )
        .unwrap();
        assert_eq!(a.lipschitz_constant(), 1.0);
    }

    #[test]
    fn entry_is_structurally_symmetric() {
        let a = EllipticCoefficients::new(
            2,
            vec![cos1(1.0, 0.1), QuasiPeriodicSignal::constant(0.2), cos1(2.0, 0.1)],
            0.3,
        )
        .unwrap();
        assert_eq!(a.entry(0, 1), a.entry(1, 0));
        assert_eq!(a.entry(1, 1).mean(), 2.0);
        assert!(EllipticCoefficients::new(2, vec![cos1(1.0, 0.1)], 0.5).is_err());
    }

    fn lattice_1d() -> Lattice {
        let grid = Grid::new(1, 10.0, 64).unwrap();
        Lattice::on_grid(&grid, 1, 16, 5.0, 41)
    }

    #[test]
    fn dissipativeness_examples() {
        let f = NonlinearitySpec::linear_damping(1.0);
        let r = f.validate_dissipativeness(&HullPhase::zero(vec![]), &lattice_1d()).unwrap();
        assert!(r.passed());
        assert_eq!(r.worst_residual, 0.0);

        let growing = NonlinearitySpec::new(vec![NonlinearTerm::new(
            QuasiPeriodicSignal::constant(1.0),
            SpatialProfile::constant(1.0),
            ScalarProfile::Identity,
        )])
        .with_dissipation(Dissipation::linear(0.1));
        let r = growing
            .validate_dissipativeness(&HullPhase::zero(vec![]), &lattice_1d())
            .unwrap();
        assert!(!r.passed());
        assert!(r.violation_count > 0);
    }

    #[test]
    fn young_split_makes_forced_damping_dissipative() {
        let mut f = NonlinearitySpec::linear_damping(1.0);
        f.terms.push(NonlinearTerm::new(cos1(0.0, 1.0), SpatialProfile::sech(1.0), ScalarProfile::One));
        let d = f.young_split(0.5).unwrap();
        assert!((d.nu - 0.75).abs() < 1e-15);
        assert!(d.b.is_zero());
        let f = f.with_dissipation(d);
        let ph = HullPhase::zero(vec![1.0]);
        let r = f.validate_dissipativeness(&ph, &lattice_1d()).unwrap();
        assert!(r.passed(), "worst {}", r.worst_residual);
        // equality is approached where |u| = sech(x)/ε
        assert!(r.worst_residual > -0.05);
    }

    #[test]
    fn young_split_rejects_quadratic_terms() {
        let f = NonlinearitySpec::new(vec![NonlinearTerm::new(
            QuasiPeriodicSignal::constant(1.0),
            SpatialProfile::sech(1.0),
            ScalarProfile::Square,
        )]);
        assert!(f.young_split(0.5).is_err());
    }

    #[test]
    fn tail_sequence_examples() {
        let grid = Grid::new(1, 20.0, 1024).unwrap();
        let zero = NonlinearitySpec::zero().with_dissipation(Dissipation::linear(1.0));
        assert_eq!(zero.tail_decay_sequence(&grid, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);

        let mut d = Dissipation::linear(1.0);
        d.c.terms.push((QuasiPeriodicSignal::constant(1.0), SpatialProfile::sech2(1.0)));
        let f = NonlinearitySpec::zero().with_dissipation(d.clone());
        let m5 = f.tail_decay_sequence(&grid, &[5.0]).unwrap()[0];
        let exact = 2.0 * (1.0 - 5f64.tanh());
        assert!((m5 - exact).abs() < 1e-3 * exact, "{m5} vs {exact}");

        let ks: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let m = f.tail_decay_sequence(&grid, &ks).unwrap();
        assert!(m.windows(2).all(|w| w[1] <= w[0]));

        let mut bad = d;
        bad.c.terms.push((QuasiPeriodicSignal::constant(1.0), SpatialProfile::constant(0.1)));
        let f = NonlinearitySpec::zero().with_dissipation(bad);
        assert!(matches!(f.tail_decay_sequence(&grid, &[1.0]), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn averaging_and_homotopy() {
        let f = NonlinearitySpec::new(vec![
            NonlinearTerm::new(cos1(0.0, 1.0), SpatialProfile::sech(1.0), ScalarProfile::Tanh),
            NonlinearTerm::new(
                QuasiPeriodicSignal::single(2.0, 2f64.sqrt(), 1.0, 0.0).unwrap(),
                SpatialProfile::constant(1.0),
                ScalarProfile::Identity,
            ),
        ]);
        let avg = f.average();
        assert_eq!(avg.terms.len(), 1);
        assert_eq!(avg.terms[0].signal, QuasiPeriodicSignal::constant(2.0));
        assert!(avg.is_autonomous());

        assert_eq!(f.homotopy(HomotopyParam::FULL), f);
        assert_eq!(f.homotopy(HomotopyParam::AVERAGED), avg);
        let half = f.homotopy(HomotopyParam::new(0.5).unwrap());
        assert_eq!(half.terms[0].signal.modes()[0], Mode::new(1.0, 0.5, 0.0));
        for lam in [0.0, 0.3, 0.9, 1.0] {
            assert_eq!(f.homotopy(HomotopyParam::new(lam).unwrap()).average(), avg);
        }
        assert!(HomotopyParam::new(1.5).is_err());
    }

    #[test]
    fn growth_check() {
        let f = NonlinearitySpec::new(vec![NonlinearTerm::new(
            cos1(0.0, 1.0),
            SpatialProfile::sech(1.0),
            ScalarProfile::Cube,
        )])
        .with_growth(Growth { c: 3.0, beta: 2.0 });
        let ph = HullPhase::zero(vec![1.0]);
        assert!(f.validate_growth(&ph, &lattice_1d()).unwrap().passed());
        let f = f.with_growth(Growth { c: 3.0, beta: 1.0 });
        assert!(!f.validate_growth(&ph, &lattice_1d()).unwrap().passed());
    }

    #[test]
    fn scalar_derivatives_match_finite_differences() {
        let h = 1e-6;
        for psi in [
            ScalarProfile::Identity,
            ScalarProfile::Square,
            ScalarProfile::Cube,
            ScalarProfile::Rational,
            ScalarProfile::Tanh,
            ScalarProfile::Sech2,
            ScalarProfile::One,
        ] {
            for u in [-2.0, -0.3, 0.0, 0.7, 1.9] {
                let fd = (psi.value(u + h) - psi.value(u - h)) / (2.0 * h);
                assert!((fd - psi.derivative(u)).abs() < 1e-7, "{psi:?} at {u}");
            }
        }
    }

    #[test]
    fn spatial_profiles() {
        let s2 = SpatialProfile::sech2(1.0);
        assert!((s2.eval(&[1.0]) - 1.0 / 1f64.cosh().powi(2)).abs() < 1e-15);
        assert_eq!(SpatialProfile::bump(1.0).eval(&[1.0]), 0.0);
        assert_eq!(SpatialProfile::bump(1.0).eval(&[0.0]), 1.0);
        let g = SpatialProfile::gaussian(2.0).with_center([1.0, 0.0]);
        assert_eq!(g.eval(&[1.0]), 1.0);
        assert!((g.abs_pow(2.0).eval(&[3.0]) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((SpatialProfile::constant(2.0).eval(&[PI]) - 2.0).abs() < 1e-16);
    }
}
