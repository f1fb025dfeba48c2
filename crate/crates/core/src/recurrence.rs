//! Recurrence evidence on skew-product trajectories, minimal-set clustering
//! and dense-orbit return times on the hull torus.

use std::fmt;

use crate::error::{Error, Result};
use crate::process::{ProcessState, Trajectory};
use crate::spectral_field::Field;
use crate::symbols::HullPhase;

/// Samples required after the base index.
pub const MIN_SAMPLES_AFTER_BASE: usize = 100;

/// Upper bound on samples entering the pairwise clustering.
pub const MAX_CLUSTER_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldMetric {
    L2,
    H1,
}

/// `w·torus_dist + field distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductMetric {
    pub field: FieldMetric,
    pub torus_weight: f64,
}

impl Default for ProductMetric {
    fn default() -> Self {
        Self { field: FieldMetric::H1, torus_weight: 1.0 }
    }
}

impl ProductMetric {
    /// Field part evaluated from the cached spectra (Parseval).
    pub fn field_distance(&self, a: &Field, b: &Field) -> f64 {
        let grid = a.grid();
        let scale = grid.cell_volume() / grid.len() as f64;
        let s: f64 = match self.field {
            FieldMetric::L2 => a.spectrum().iter().zip(b.spectrum()).map(|(x, y)| (x - y).norm_sqr()).sum(),
            FieldMetric::H1 => a
                .spectrum()
                .iter()
                .zip(b.spectrum())
                .zip(grid.mode_norms_sq())
                .map(|((x, y), k2)| (1.0 + k2) * (x - y).norm_sqr())
                .sum(),
        };
        (scale * s).sqrt()
    }

    pub fn distance(&self, a: &ProcessState, b: &ProcessState) -> Result<f64> {
        let torus = if self.torus_weight == 0.0 { 0.0 } else { a.phase.torus_distance(&b.phase)? };
        Ok(self.torus_weight * torus + self.field_distance(&a.u, &b.u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    RecurrentConsistent,
    Inconclusive,
    NonRecurrentEvidence,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::RecurrentConsistent => "recurrent-consistent",
            Verdict::Inconclusive => "inconclusive",
            Verdict::NonRecurrentEvidence => "non-recurrent-evidence",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    pub epsilon: f64,
    pub base_time: f64,
    pub window: f64,
    pub return_times: Vec<f64>,
    /// Largest gap among base → first return, successive returns, and last
    /// return → window end.
    pub max_gap: f64,
    pub trailing_gap: f64,
    /// Empirical `ℓ(ε)`: the largest observed gap.
    pub ell_estimate: f64,
    pub sliding_ok: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceOptions {
    pub metric: ProductMetric,
    /// `max_gap` must not exceed this fraction of the window.
    pub gap_fraction: f64,
    /// Sliding windows have length `sliding_factor · max_gap`.
    pub sliding_factor: f64,
}

impl Default for RecurrenceOptions {
    fn default() -> Self {
        Self { metric: ProductMetric::default(), gap_fraction: 1.0 / 3.0, sliding_factor: 1.5 }
    }
}

/// Every window `[a, a+len] ⊂ [lo, hi]` contains a time from `times`.
fn every_window_hit(times: &[f64], lo: f64, hi: f64, len: f64) -> bool {
    if len >= hi - lo {
        return !times.is_empty();
    }
    // a window misses iff some gap between consecutive hits (with the ends) exceeds len
    let mut prev = lo;
    for &t in times.iter().chain(std::iter::once(&hi)) {
        if t - prev > len {
            return false;
        }
        prev = t;
    }
    true
}

pub fn recurrence_test(traj: &Trajectory, base_index: usize, epsilon: f64, opts: &RecurrenceOptions) -> Result<RecurrenceReport> {
    if !(epsilon > 0.0) {
        return Err(Error::config(format!("epsilon must be positive, got {epsilon}")));
    }
    let after = traj.samples.len().saturating_sub(base_index + 1);
    if after < MIN_SAMPLES_AFTER_BASE {
        return Err(Error::TooShort { needed: MIN_SAMPLES_AFTER_BASE, got: after });
    }
    let base = &traj.samples[base_index];
    let end = traj.samples[traj.samples.len() - 1].t;
    let window = end - base.t;
    let mut return_times = Vec::new();
    for s in &traj.samples[base_index + 1..] {
        if opts.metric.distance(s, base)? < epsilon {
            return_times.push(s.t);
        }
    }
    let mut max_gap: f64 = 0.0;
    let mut prev = base.t;
    for &t in &return_times {
        max_gap = max_gap.max(t - prev);
        prev = t;
    }
    let trailing_gap = end - prev;
    max_gap = max_gap.max(trailing_gap);
    let ell_estimate = max_gap;
    let sliding_ok = every_window_hit(&return_times, base.t, end, opts.sliding_factor * max_gap);
    let verdict = if return_times.is_empty() || trailing_gap >= 0.5 * window {
        Verdict::NonRecurrentEvidence
    } else if max_gap <= opts.gap_fraction * window && sliding_ok {
        Verdict::RecurrentConsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(RecurrenceReport {
        epsilon,
        base_time: base.t,
        window,
        return_times,
        max_gap,
        trailing_gap,
        ell_estimate,
        sliding_ok,
        verdict,
    })
}

/// Largest pairwise product distance among samples from `from_index` on,
/// thinned to at most [`MAX_CLUSTER_SAMPLES`] points.
pub fn orbit_diameter(traj: &Trajectory, from_index: usize, metric: &ProductMetric) -> Result<f64> {
    let pts = thinned(&traj.samples[from_index.min(traj.samples.len())..]);
    let mut diam: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            diam = diam.max(metric.distance(pts[i], pts[j])?);
        }
    }
    Ok(diam)
}

fn thinned(samples: &[ProcessState]) -> Vec<&ProcessState> {
    let stride = samples.len().div_ceil(MAX_CLUSTER_SAMPLES).max(1);
    samples.iter().step_by(stride).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOrbitReport {
    /// One time per contiguous visit to the δ-ball: the sample of least distance.
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub scan_step: f64,
    /// Smallest distance seen over the scan.
    pub closest: f64,
}

/// Scans `t ↦ translate(phase₀, ω, t)` on `[0, T_max]` for visits to the
/// δ-ball around `target`.
pub fn dense_orbit_returns(phase0: &HullPhase, omega: f64, target: &HullPhase, delta: f64, t_max: f64) -> Result<DenseOrbitReport> {
    if !(delta > 0.0 && omega > 0.0 && t_max >= 0.0) {
        return Err(Error::config("dense orbit scan needs delta > 0, omega > 0, T_max >= 0"));
    }
    let rate = omega * phase0.max_frequency();
    let dt = if rate > 0.0 { 0.5 * delta / rate } else { t_max.max(1.0) };
    let steps = (t_max / dt).ceil() as usize;
    let mut times = Vec::new();
    let mut distances = Vec::new();
    let mut closest = f64::INFINITY;
    let mut run: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let t = (i as f64 * dt).min(t_max);
        let d = phase0.translate(omega, t).torus_distance(target)?;
        closest = closest.min(d);
        if d < delta {
            run = match run {
                Some((bt, bd)) if bd <= d => Some((bt, bd)),
                _ => Some((t, d)),
            };
        } else if let Some((bt, bd)) = run.take() {
            times.push(bt);
            distances.push(bd);
        }
    }
    if let Some((bt, bd)) = run {
        times.push(bt);
        distances.push(bd);
    }
    Ok(DenseOrbitReport { times, distances, scan_step: dt, closest })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub size: usize,
    pub diameter: f64,
    pub first_time: f64,
    pub last_time: f64,
    /// Number of separate visits (maximal runs of consecutive samples).
    pub visits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalSetReport {
    pub samples_used: usize,
    pub clusters: Vec<Cluster>,
    pub consistent_with_minimal: bool,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clustering of the post-burn-in samples at radius `eps_cluster`.
pub fn minimal_set_probe(traj: &Trajectory, burn_in: usize, eps_cluster: f64, metric: &ProductMetric) -> Result<MinimalSetReport> {
    if burn_in >= traj.samples.len() {
        return Err(Error::config(format!(
            "burn-in index {burn_in} leaves no samples (trajectory has {})",
            traj.samples.len()
        )));
    }
    let pts = thinned(&traj.samples[burn_in..]);
    let n = pts.len();
    let mut dist = vec![0.0; n * n];
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = metric.distance(pts[i], pts[j])?;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
            if d <= eps_cluster {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut order: Vec<usize> = roots.clone();
    order.sort_unstable();
    order.dedup();
    let clusters = order
        .iter()
        .map(|&r| {
            let members: Vec<usize> = (0..n).filter(|&i| roots[i] == r).collect();
            let mut diameter: f64 = 0.0;
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    diameter = diameter.max(dist[i * n + j]);
                }
            }
            let visits = members.windows(2).filter(|w| w[1] != w[0] + 1).count() + 1;
            Cluster {
                size: members.len(),
                diameter,
                first_time: pts[members[0]].t,
                last_time: pts[members[members.len() - 1]].t,
                visits,
            }
        })
        .collect::<Vec<_>>();
    Ok(MinimalSetReport { samples_used: n, consistent_with_minimal: clusters.len() == 1, clusters })
}
