//! Quasi-periodic signals and their hull.
//!
//! A signal is a finite trigonometric sum
//! `c0 + Σ_k [a_k cos(λ_k τ + φ_k) + b_k sin(λ_k τ + φ_k)]`. Its hull is the
//! torus of phase vectors `φ`, one angle per distinct frequency of the signal
//! family, and time translation acts on it as a linear flow.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance used to identify two frequencies as the same.
const FREQ_MATCH_RTOL: f64 = 1e-12;

/// One oscillatory component of a [`QuasiPeriodicSignal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub frequency: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

impl Mode {
    pub fn new(frequency: f64, cos_amp: f64, sin_amp: f64) -> Self {
        Self { frequency, cos_amp, sin_amp }
    }

    fn abs_amp(&self) -> f64 {
        self.cos_amp.abs() + self.sin_amp.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicSignal {
    mean_term: f64,
    modes: Vec<Mode>,
}

impl QuasiPeriodicSignal {
    pub fn new(mean_term: f64, modes: Vec<Mode>) -> Result<Self> {
        if !mean_term.is_finite() {
            return Err(Error::config("signal mean term must be finite"));
        }
        for (i, m) in modes.iter().enumerate() {
            if !(m.frequency.is_finite() && m.frequency > 0.0) {
                return Err(Error::config(format!(
                    "signal frequency {} must be strictly positive",
                    m.frequency
                )));
            }
            if !(m.cos_amp.is_finite() && m.sin_amp.is_finite()) {
                return Err(Error::config("signal amplitudes must be finite"));
            }
            for other in &modes[..i] {
                if same_frequency(other.frequency, m.frequency) {
                    return Err(Error::config(format!(
                        "duplicate signal frequency {}",
                        m.frequency
                    )));
                }
            }
        }
        Ok(Self { mean_term, modes })
    }

    pub fn constant(value: f64) -> Self {
        Self { mean_term: value, modes: Vec::new() }
    }

    /// `c0 + a cos(λτ) + b sin(λτ)`.
    pub fn single(mean_term: f64, frequency: f64, cos_amp: f64, sin_amp: f64) -> Result<Self> {
        Self::new(mean_term, vec![Mode::new(frequency, cos_amp, sin_amp)])
    }

    pub fn mean(&self) -> f64 {
        self.mean_term
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// True when every oscillatory amplitude vanishes.
    pub fn is_constant(&self) -> bool {
        self.modes.iter().all(|m| m.cos_amp == 0.0 && m.sin_amp == 0.0)
    }

    pub fn max_frequency(&self) -> f64 {
        self.modes.iter().map(|m| m.frequency).fold(0.0, f64::max)
    }

    /// Upper bound for `|σ(τ)|` over the whole hull.
    pub fn sup_abs(&self) -> f64 {
        self.mean_term.abs() + self.modes.iter().map(Mode::abs_amp).sum::<f64>()
    }

    /// Upper bound for `σ(τ)` over the whole hull.
    pub fn sup(&self) -> f64 {
        self.mean_term + self.modes.iter().map(Mode::abs_amp).sum::<f64>()
    }

    /// `Σ_k λ_k (|a_k| + |b_k|)`, a Lipschitz constant for every hull element.
    pub fn lipschitz_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.frequency * m.abs_amp()).sum()
    }

    pub fn evaluate(&self, phase: &HullPhase, tau: f64) -> Result<f64> {
        let mut acc = self.mean_term;
        for m in &self.modes {
            let arg = m.frequency * tau + phase.angle_for(m.frequency)?;
            let (s, c) = arg.sin_cos();
            acc += m.cos_amp * c + m.sin_amp * s;
        }
        Ok(acc)
    }

    /// Exact `∫_s^t σ(p) dp` for the hull element selected by `phase`.
    pub fn antiderivative_increment(&self, phase: &HullPhase, s: f64, t: f64) -> Result<f64> {
        // sum-to-product form keeps short intervals free of cancellation
        Ok(self.mean_term * (t - s) + self.oscillatory_increment(phase, s, t)?)
    }

    /// `∫_s^t (σ(p) − σ̄) dp`; exactly zero when every amplitude vanishes.
    pub fn oscillatory_increment(&self, phase: &HullPhase, s: f64, t: f64) -> Result<f64> {
        let mut acc = 0.0;
        for m in &self.modes {
            let lam = m.frequency;
            let half = 0.5 * lam * (t - s);
            let mid = 0.5 * lam * (t + s) + phase.angle_for(lam)?;
            let (sm, cm) = mid.sin_cos();
            acc += 2.0 * half.sin() / lam * (m.cos_amp * cm + m.sin_amp * sm);
        }
        Ok(acc)
    }

    /// `(1/T) ∫_s^{s+T} σ(p) dp`.
    pub fn finite_average(&self, phase: &HullPhase, s: f64, window: f64) -> Result<f64> {
        if !(window > 0.0) {
            return Err(Error::Domain(format!("averaging window must be positive, got {window}")));
        }
        Ok(self.antiderivative_increment(phase, s, s + window)? / window)
    }

    /// Uniform bound on `|finite_average − mean|` over all `s` and hull elements.
    pub fn mu_bound(&self, window: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.abs_amp() * 2.0 / (m.frequency * window))
            .sum()
    }

    /// `λ(σ − σ̄) + σ̄`: oscillatory amplitudes scaled by `lambda`.
    pub fn homotopy(&self, lambda: f64) -> Self {
        Self {
            mean_term: self.mean_term,
            modes: self
                .modes
                .iter()
                .map(|m| Mode::new(m.frequency, lambda * m.cos_amp, lambda * m.sin_amp))
                .collect(),
        }
    }

    pub fn averaged(&self) -> Self {
        Self::constant(self.mean_term)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mean_term: factor * self.mean_term,
            modes: self
                .modes
                .iter()
                .map(|m| Mode::new(m.frequency, factor * m.cos_amp, factor * m.sin_amp))
                .collect(),
        }
    }
}

impl fmt::Display for QuasiPeriodicSignal {
    /// Same syntax the config parser accepts: `mean; f:a:b, f:a:b`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mean_term)?;
        for (i, m) in self.modes.iter().enumerate() {
            let sep = if i == 0 { "; " } else { ", " };
            write!(f, "{sep}{}:{}:{}", m.frequency, m.cos_amp, m.sin_amp)?;
        }
        Ok(())
    }
}

/// A point of the hull torus: one angle in `[0, 2π)` per base frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPhase {
    frequencies: Vec<f64>,
    angles: Vec<f64>,
}

impl HullPhase {
    pub fn zero(frequencies: Vec<f64>) -> Self {
        let angles = vec![0.0; frequencies.len()];
        Self { frequencies, angles }
    }

    pub fn new(frequencies: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if frequencies.len() != angles.len() {
            return Err(Error::Dimension(format!(
                "{} frequencies but {} phase angles",
                frequencies.len(),
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("phase angles must be finite"));
        }
        let angles = angles.into_iter().map(wrap_angle).collect();
        Ok(Self { frequencies, angles })
    }

    pub fn dim(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies.iter().copied().fold(0.0, f64::max)
    }

    fn angle_for(&self, frequency: f64) -> Result<f64> {
        self.frequencies
            .iter()
            .position(|&f| same_frequency(f, frequency))
            .map(|i| self.angles[i])
            .ok_or_else(|| {
                Error::Dimension(format!(
                    "frequency {frequency} is not a coordinate of this hull phase"
                ))
            })
    }

    /// The translation group `T_ω(h)`: `φ_k ↦ φ_k + λ_k ω h (mod 2π)`.
    pub fn translate(&self, omega: f64, h: f64) -> Self {
        let angles = self
            .frequencies
            .iter()
            .zip(&self.angles)
            .map(|(&lam, &phi)| wrap_angle(phi + lam * omega * h))
            .collect();
        Self { frequencies: self.frequencies.clone(), angles }
    }

    /// Max over components of the angular distance.
    pub fn torus_distance(&self, other: &HullPhase) -> Result<f64> {
        if self.frequencies.len() != other.frequencies.len()
            || self
                .frequencies
                .iter()
                .zip(&other.frequencies)
                .any(|(&a, &b)| !same_frequency(a, b))
        {
            return Err(Error::Dimension("hull phases live on different tori".into()));
        }
        Ok(self
            .angles
            .iter()
            .zip(&other.angles)
            .map(|(&a, &b)| angular_distance(a, b))
            .fold(0.0, f64::max))
    }

    /// Adds a constant offset to every angle.
    pub fn shifted(&self, offsets: &[f64]) -> Result<Self> {
        if offsets.len() != self.angles.len() {
            return Err(Error::Dimension("phase offset length mismatch".into()));
        }
        let angles = self.angles.iter().zip(offsets).map(|(a, o)| a + o).collect();
        Self::new(self.frequencies.clone(), angles)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance on the circle `ℝ/2πℤ`, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQ_MATCH_RTOL * a.abs().max(b.abs())
}

/// Distinct frequencies across a family of signals, ascending.
pub fn family_frequencies<'a>(signals: impl IntoIterator<Item = &'a QuasiPeriodicSignal>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for sig in signals {
        for m in sig.modes() {
            if !out.iter().any(|&f| same_frequency(f, m.frequency)) {
                out.push(m.frequency);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// A pair of frequencies whose ratio is (numerically) a small rational `p/q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalRelation {
    pub first: f64,
    pub second: f64,
    pub p: u32,
    pub q: u32,
}

/// Heuristic independence check: flags pairs with `λ_i/λ_j = p/q`, `p, q ≤ max_den`.
pub fn rational_relations(frequencies: &[f64], max_den: u32) -> Vec<RationalRelation> {
    let mut out = Vec::new();
    for (i, &a) in frequencies.iter().enumerate() {
        for &b in &frequencies[i + 1..] {
            let ratio = a / b;
            'search: for q in 1..=max_den {
                let p = (ratio * q as f64).round();
                if p >= 1.0 && p <= max_den as f64 && (ratio - p / q as f64).abs() <= 1e-9 * ratio {
                    out.push(RationalRelation { first: a, second: b, p: p as u32, q });
                    break 'search;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn two_tone() -> QuasiPeriodicSignal {
        QuasiPeriodicSignal::new(0.0, vec![Mode::new(1.0, 1.0, 0.0), Mode::new(SQRT_2, 1.0, 0.0)])
            .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let c = QuasiPeriodicSignal::constant(2.0);
        assert_eq!(c.evaluate(&HullPhase::zero(vec![]), 3.7).unwrap(), 2.0);

        let cos = QuasiPeriodicSignal::single(0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(cos.evaluate(&HullPhase::zero(vec![1.0]), 0.0).unwrap(), 1.0);

        let sig = two_tone();
        let phase = HullPhase::zero(family_frequencies([&sig]));
        let v = sig.evaluate(&phase, 1.0).unwrap();
        assert!((v - (1f64.cos() + SQRT_2.cos())).abs() < 1e-15);
        assert!((v - 0.69625).abs() < 1e-5);
    }

    #[test]
    fn evaluate_rejects_foreign_phase() {
        let sig = two_tone();
        let err = sig.evaluate(&HullPhase::zero(vec![1.0]), 0.0).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn mean_and_average() {
        let cos = QuasiPeriodicSignal::single(0.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(cos.mean(), 0.0);
        let p = HullPhase::zero(vec![1.0]);
        assert!(cos.finite_average(&p, 0.0, 2.0 * PI).unwrap().abs() < 1e-15);
        assert_eq!(QuasiPeriodicSignal::single(3.0, SQRT_2, 0.5, 0.0).unwrap().mean(), 3.0);

        let sig = two_tone();
        let p2 = HullPhase::zero(sig_freqs(&sig));
        let v = sig.finite_average(&p2, 1.0, 10.0).unwrap();
        let bound = 0.2 * (1.0 + 1.0 / SQRT_2);
        assert!((sig.mu_bound(10.0) - bound).abs() < 1e-15);
        assert!(v.abs() <= bound);
        assert!(cos.finite_average(&p, 0.0, 0.0).is_err());
    }

    fn sig_freqs(s: &QuasiPeriodicSignal) -> Vec<f64> {
        family_frequencies([s])
    }

    #[test]
    fn mu_bound_examples() {
        assert_eq!(QuasiPeriodicSignal::constant(5.0).mu_bound(3.0), 0.0);
        let cos = QuasiPeriodicSignal::single(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!((cos.mu_bound(100.0) - 0.02).abs() < 1e-17);
    }

    #[test]
    fn translate_examples() {
        let p = HullPhase::new(vec![1.0, SQRT_2], vec![0.3, 1.1]).unwrap();
        assert_eq!(p.translate(3.0, 0.0), p);
        let one = HullPhase::new(vec![1.0], vec![0.4]).unwrap();
        assert!(one.translate(1.0, 2.0 * PI).torus_distance(&one).unwrap() < 1e-14);
    }

    #[test]
    fn antiderivative_examples() {
        let p = HullPhase::zero(vec![1.0]);
        let c = QuasiPeriodicSignal::constant(1.5);
        assert_eq!(c.antiderivative_increment(&p, 0.0, 4.0).unwrap(), 6.0);
        let cos = QuasiPeriodicSignal::single(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(cos.antiderivative_increment(&p, 0.0, 2.0 * PI).unwrap().abs() < 1e-15);
    }

    #[test]
    fn constructor_invariants() {
        assert!(QuasiPeriodicSignal::single(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(QuasiPeriodicSignal::single(0.0, -1.0, 1.0, 0.0).is_err());
        assert!(QuasiPeriodicSignal::new(0.0, vec![Mode::new(2.0, 1.0, 0.0), Mode::new(2.0, 0.0, 1.0)])
            .is_err());
        assert!(HullPhase::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn homotopy_scales_amplitudes() {
        let cos = QuasiPeriodicSignal::single(2.0, 1.0, 1.0, -0.5).unwrap();
        let half = cos.homotopy(0.5);
        assert_eq!(half.modes()[0], Mode::new(1.0, 0.5, -0.25));
        assert_eq!(half.mean(), 2.0);
        assert_eq!(cos.homotopy(1.0), cos);
        assert!(cos.homotopy(0.0).is_constant());
    }

    #[test]
    fn rational_relation_heuristic() {
        assert!(rational_relations(&[1.0, SQRT_2], 64).is_empty());
        let rel = rational_relations(&[1.0, 1.5], 64);
        assert_eq!(rel.len(), 1);
        assert_eq!((rel[0].p, rel[0].q), (2, 3));
    }

    #[test]
    fn display_round_trips_syntax() {
        let s = QuasiPeriodicSignal::single(1.0, 2.0, 0.5, 0.0).unwrap();
        assert_eq!(s.to_string(), "1; 2:0.5:0");
    }

    #[test]
    fn angle_wrapping() {
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert!((wrap_angle(-0.5) - (TAU - 0.5)).abs() < 1e-15);
        assert!((angular_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
    }
}
