//! Exact linear propagator in mode space and the averaged semigroup.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::coefficients::{EllipticCoefficients, HomotopyParam};
use crate::error::{Error, Result};
use crate::spectral_field::{Field, Grid};
use crate::symbols::HullPhase;

pub const DEFAULT_DEVIATION_SAMPLES: usize = 256;

const ELLIPTICITY_TAU_SAMPLES: usize = 128;
const ELLIPTICITY_XI_SAMPLES: usize = 16;

/// Principal part `A(λ, ωt)` for a fixed hull element at time zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorContext {
    coeffs: EllipticCoefficients,
    scaled: EllipticCoefficients,
    lambda: HomotopyParam,
    omega: f64,
    phase: HullPhase,
}

impl PropagatorContext {
    /// Fails with a hypothesis error when the ellipticity check does not pass.
    pub fn new(coeffs: EllipticCoefficients, lambda: HomotopyParam, omega: f64, phase: HullPhase) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::config(format!("omega must be positive, got {omega}")));
        }
        let report = coeffs.validate_ellipticity(&phase, ELLIPTICITY_TAU_SAMPLES, ELLIPTICITY_XI_SAMPLES)?;
        if !report.passed() {
            return Err(Error::Hypothesis(format!(
                "ellipticity fails at {} (residual {:e})",
                report.worst_point, report.worst_residual
            )));
        }
        let scaled = coeffs.homotopy(lambda);
        Ok(Self { coeffs, scaled, lambda, omega, phase })
    }

    pub fn coefficients(&self) -> &EllipticCoefficients {
        &self.coeffs
    }

    pub fn lambda(&self) -> HomotopyParam {
        self.lambda
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn phase(&self) -> &HullPhase {
        &self.phase
    }

    /// Same coefficients, different hull element.
    pub fn with_phase(&self, phase: HullPhase) -> Self {
        Self { phase, ..self.clone() }
    }

    /// `Σ_ij ξ_iξ_j ∫_s^t α_ij(λ, ωp) dp` for every mode.
    fn exponents(&self, grid: &Grid, s: f64, t: f64) -> Result<Vec<f64>> {
        let ints = self.scaled.integrated_upper(&self.phase, self.omega, s, t)?;
        Ok(quadratic_form(grid, &ints))
    }
}

fn quadratic_form(grid: &Grid, upper: &[f64; 3]) -> Vec<f64> {
    grid.mode_quadratics()
        .iter()
        .map(|q| q[0] * upper[0] + 2.0 * q[1] * upper[1] + q[2] * upper[2])
        .collect()
}

fn apply_factors(u: &Field, exponents: &[f64]) -> Field {
    let spec: Vec<Complex64> = u
        .spectrum()
        .iter()
        .zip(exponents)
        .map(|(c, e)| c * (-e).exp())
        .collect();
    Field::from_spectrum(*u.grid(), spec)
}

/// `U(t,s)u`.
pub fn linear_propagate(ctx: &PropagatorContext, s: f64, t: f64, u: &Field) -> Result<Field> {
    if t < s {
        return Err(Error::Order { s, t });
    }
    if t == s {
        return Ok(u.clone());
    }
    Ok(apply_factors(u, &ctx.exponents(u.grid(), s, t)?))
}

/// `e^{−Āt}u` with `Ā` built from the coefficient means.
pub fn averaged_semigroup(coeffs: &EllipticCoefficients, t: f64, u: &Field) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::Order { s: 0.0, t });
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    let m = coeffs.mean_upper();
    let ints = [m[0] * t, m[1] * t, m[2] * t];
    Ok(apply_factors(u, &quadratic_form(u.grid(), &ints)))
}

/// `sup_i ‖U(t_i,0)u − e^{−Āt_i}u‖_{L²}` over `t_i = iT/samples`, `i = 1..=samples`.
pub fn propagator_deviation(ctx: &PropagatorContext, horizon: f64, u: &Field, samples: usize) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::Domain(format!("deviation horizon must be positive, got {horizon}")));
    }
    let samples = samples.max(1);
    u.spectrum();
    let devs: Vec<Result<f64>> = (1..=samples)
        .into_par_iter()
        .map(|i| {
            let t = horizon * i as f64 / samples as f64;
            let a = linear_propagate(ctx, 0.0, t, u)?;
            let b = averaged_semigroup(ctx.coefficients(), t, u)?;
            a.l2_distance(&b)
        })
        .collect();
    devs.into_iter().try_fold(0.0_f64, |acc, d| Ok(acc.max(d?)))
}

/// `M = max(1, (2eν₀)^{−1/2})`, from `√(1+y²)e^{−ν₀y²τ} ≤ 1 + y e^{−ν₀y²τ}`.
pub fn smoothing_constant(nu0: f64) -> f64 {
    (2.0 * std::f64::consts::E * nu0).sqrt().recip().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingReport {
    pub constant: f64,
    pub l2_in: f64,
    pub h1_out: f64,
    /// `M(1 + (t−s)^{−1/2})`.
    pub bound_factor: f64,
    pub passed: bool,
}

impl SmoothingReport {
    /// Measured `‖U(t,s)u‖_{H¹} / ‖u‖_{L²}`; zero for the zero field.
    pub fn ratio(&self) -> f64 {
        if self.l2_in == 0.0 {
            0.0
        } else {
            self.h1_out / self.l2_in
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound_factor * self.l2_in
    }
}

pub fn smoothing_check(ctx: &PropagatorContext, s: f64, t: f64, u: &Field) -> Result<SmoothingReport> {
    if !(t > s) {
        return Err(Error::Order { s, t });
    }
    let m = smoothing_constant(ctx.coefficients().nu0());
    let h1_out = linear_propagate(ctx, s, t, u)?.h1_norm();
    let l2_in = u.l2_norm();
    let bound_factor = m * (1.0 + (t - s).sqrt().recip());
    Ok(SmoothingReport {
        constant: m,
        l2_in,
        h1_out,
        bound_factor,
        passed: h1_out <= bound_factor * l2_in * (1.0 + 1e-12),
    })
}
