//! Periodic truncation of ℝᴺ (N ∈ {1, 2}) and real grid functions on it.
//!
//! Nodes sit at `x_j = −L + j·Δx`, `Δx = 2L/n`. Spectral coefficients use the
//! unnormalised forward DFT, so Parseval reads `Σ|u_j|² = n^{-d} Σ|û_k|²`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"APFX";
pub const SNAPSHOT_VERSION: u16 = 1;

/// Largest slope of the cubic cutoff ramp `3r² − 2r³` on `[0, 1]`.
pub const CUTOFF_SLOPE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::config(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::config(format!("grid half width must be positive, got {half_width}")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::config(format!(
                "points per dimension must be a power of two >= 16, got {n}"
            )));
        }
        Ok(Self { dim, half_width, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Volume element `Δx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// 1D node coordinates `−L + jΔx`.
    pub fn axis(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.n).map(|j| -self.half_width + j as f64 * dx).collect()
    }

    /// Node coordinates in row-major order; unused components are zero.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let axis = self.axis();
        match self.dim {
            1 => axis.iter().map(|&x| [x, 0.0]).collect(),
            _ => {
                let mut out = Vec::with_capacity(self.len());
                for &x in &axis {
                    for &y in &axis {
                        out.push([x, y]);
                    }
                }
                out
            }
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        self.nodes().iter().map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt()).collect()
    }

    /// Angular wavenumbers `(π/L)·k` in FFT storage order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as isize;
        let base = std::f64::consts::PI / self.half_width;
        (0..n)
            .map(|k| if k < n / 2 { k } else { k - n })
            .map(|k| base * k as f64)
            .collect()
    }

    /// Wavenumbers for first-derivative factors: the Nyquist entry is zeroed
    /// so that odd symbols stay conjugate-symmetric.
    pub fn odd_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.wavenumbers();
        k[self.n / 2] = 0.0;
        k
    }

    /// Per-mode `(ξ_1², ξ_1ξ_2, ξ_2²)`; the cross term uses odd wavenumbers.
    pub fn mode_quadratics(&self) -> Vec<[f64; 3]> {
        let k = self.wavenumbers();
        match self.dim {
            1 => k.iter().map(|&a| [a * a, 0.0, 0.0]).collect(),
            _ => {
                let ko = self.odd_wavenumbers();
                let mut out = Vec::with_capacity(self.len());
                for i in 0..self.n {
                    for j in 0..self.n {
                        out.push([k[i] * k[i], ko[i] * ko[j], k[j] * k[j]]);
                    }
                }
                out
            }
        }
    }

    /// `|ξ|²` per mode.
    pub fn mode_norms_sq(&self) -> Vec<f64> {
        self.mode_quadratics().iter().map(|q| q[0] + q[2]).collect()
    }

    /// Best constant in `‖u‖_∞ ≤ C ‖u‖_{H¹}` on this grid, attained by
    /// `û ∝ 1/(1+|ξ|²)`: `C² = Σ_ξ (1+|ξ|²)^{-1} / (2L)^d`.
    pub fn sup_embedding_constant(&self) -> f64 {
        let s: f64 = self.mode_norms_sq().iter().map(|&k2| 1.0 / (1.0 + k2)).sum();
        (s / (2.0 * self.half_width).powi(self.dim as i32)).sqrt()
    }

    /// Quadrature weights for `∫_{|x| ≥ k}`: nodes on the sphere get half weight.
    fn tail_weights(&self, k: f64) -> Vec<f64> {
        let tol = 1e-12 * self.half_width;
        self.radii()
            .into_iter()
            .map(|r| {
                if (r - k).abs() <= tol {
                    0.5
                } else if r > k {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// `∫_{|x|≥k} f` by node quadrature of the supplied node values.
    pub fn tail_integral(&self, values: &[f64], k: f64) -> f64 {
        let w = self.tail_weights(k);
        self.cell_volume() * values.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>()
    }
}

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(HashMap::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

fn transform_in_place(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n;
    let fft = plan(n, inverse);
    match grid.dim {
        1 => fft.process(data),
        _ => {
            // rows (contiguous), then columns
            fft.process(data);
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..n {
                for i in 0..n {
                    column[i] = data[i * n + j];
                }
                fft.process(&mut column);
                for i in 0..n {
                    data[i * n + j] = column[i];
                }
            }
        }
    }
}

/// Forward DFT of real node values.
pub fn forward(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_in_place(grid, &mut data, false);
    data
}

/// Normalised inverse DFT; the imaginary part is discarded.
pub fn inverse(grid: &Grid, spectrum: &[Complex64]) -> Vec<f64> {
    let mut data = spectrum.to_vec();
    transform_in_place(grid, &mut data, true);
    let scale = 1.0 / grid.len() as f64;
    data.iter().map(|c| c.re * scale).collect()
}

/// A real grid function with a lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], spectrum: OnceLock::new() }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("field values must be finite".into()));
        }
        Ok(Self { grid, values, spectrum: OnceLock::new() })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim;
        let values = grid.nodes().iter().map(|p| f(&p[..dim])).collect();
        Self { grid, values, spectrum: OnceLock::new() }
    }

    pub fn from_spectrum(grid: Grid, spectrum: Vec<Complex64>) -> Self {
        let values = inverse(&grid, &spectrum);
        Self { grid, values, spectrum: OnceLock::new() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable node access; drops the cached spectrum.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| forward(&self.grid, &self.values))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// L² norm evaluated from the spectrum (Parseval).
    pub fn l2_norm_spectral(&self) -> f64 {
        let s: f64 = self.spectrum().iter().map(|c| c.norm_sqr()).sum();
        (self.grid.cell_volume() / self.grid.len() as f64 * s).sqrt()
    }

    pub fn h1_norm(&self) -> f64 {
        let k2 = self.grid.mode_norms_sq();
        let s: f64 = self
            .spectrum()
            .iter()
            .zip(&k2)
            .map(|(c, k)| (1.0 + k) * c.norm_sqr())
            .sum();
        (self.grid.cell_volume() / self.grid.len() as f64 * s).sqrt()
    }

    /// `∫_{|x|≥k} |u|²`.
    pub fn tail_mass(&self, k: f64) -> Result<f64> {
        if !(k > 0.0 && k < self.grid.half_width) {
            return Err(Error::Domain(format!(
                "tail radius {k} must lie in (0, L = {})",
                self.grid.half_width
            )));
        }
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        Ok(self.grid.tail_integral(&sq, k))
    }

    /// `∫ w |u|²` for node weights `w`.
    pub fn weighted_mass(&self, weights: &Field) -> f64 {
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&weights.values)
                .map(|(u, w)| w * u * u)
                .sum::<f64>()
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, values, spectrum: OnceLock::new() })
    }

    pub fn add_scaled(&self, factor: f64, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + factor * b)
            .collect();
        Ok(Field { grid: self.grid, values, spectrum: OnceLock::new() })
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| factor * v).collect(),
            spectrum: OnceLock::new(),
        }
    }

    pub fn h1_distance(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.h1_norm())
    }

    pub fn l2_distance(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.l2_norm())
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&[self.grid.dim as u8])?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_width.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Field> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::config("snapshot: bad magic bytes"));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != SNAPSHOT_VERSION {
            return Err(Error::config(format!("snapshot: unsupported version {version}")));
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let grid = Grid::new(b1[0] as usize, f64::from_le_bytes(b8), u32::from_le_bytes(b4) as usize)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Field::from_values(grid, values)
    }
}

/// Smooth ramp `θ(s)`: 0 on `[0,1]`, `3r²−2r³` with `r = s−1` on `[1,2]`, 1 beyond.
pub fn cutoff_ramp(s: f64) -> f64 {
    let r = (s - 1.0).clamp(0.0, 1.0);
    r * r * (3.0 - 2.0 * r)
}

/// `θ_k(x) = θ(|x|²/k²)`: zero for `|x| ≤ k`, one for `|x| ≥ √2 k`.
pub fn cutoff_field(grid: &Grid, k: f64) -> Result<Field> {
    if !(k > 0.0) || std::f64::consts::SQRT_2 * k > grid.half_width {
        return Err(Error::Domain(format!(
            "cutoff radius {k}: need 0 < √2·k ≤ L = {}",
            grid.half_width
        )));
    }
    Ok(Field::from_fn(*grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        cutoff_ramp(r2 / (k * k))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n: usize, l: f64) -> Grid {
        Grid::new(1, l, n).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid::new(3, 1.0, 16).is_err());
        assert!(Grid::new(1, 1.0, 8).is_err());
        assert!(Grid::new(1, 1.0, 48).is_err());
        assert!(Grid::new(1, -1.0, 16).is_err());
        let g = grid1(64, 5.0);
        assert!((g.spacing() * 64.0 - 10.0).abs() < 1e-14);
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert!((k[32] + 32.0 * PI / 5.0).abs() < 1e-12);
    }

    #[test]
    fn norms_of_single_mode() {
        let l = 3.0;
        let g = grid1(64, l);
        let u = Field::from_fn(g, |x| (PI * x[0] / l).sin());
        assert!((u.l2_norm().powi(2) - l).abs() < 1e-12);
        let expect_h1 = l * (1.0 + (PI / l).powi(2));
        assert!((u.h1_norm().powi(2) - expect_h1).abs() < 1e-11);
        let z = Field::zeros(g);
        assert_eq!(z.l2_norm(), 0.0);
        assert_eq!(z.h1_norm(), 0.0);
    }

    #[test]
    fn tail_mass_examples() {
        let l = 8.0;
        let g = grid1(128, l);
        let ones = Field::from_fn(g, |_| 1.0);
        assert!((ones.tail_mass(l / 2.0).unwrap() - l).abs() < 1e-12);
        let inner = Field::from_fn(g, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 });
        assert_eq!(inner.tail_mass(2.0).unwrap(), 0.0);
        assert!(ones.tail_mass(l).is_err());
        assert!(ones.tail_mass(0.0).is_err());
    }

    #[test]
    fn cutoff_examples() {
        let g = grid1(128, 8.0);
        let th = cutoff_field(&g, 2.0).unwrap();
        let axis = g.axis();
        for (x, v) in axis.iter().zip(th.values()) {
            if x.abs() <= 2.0 {
                assert_eq!(*v, 0.0);
            }
            if x.abs() >= 2.0 * std::f64::consts::SQRT_2 {
                assert_eq!(*v, 1.0);
            }
        }
        assert!(cutoff_field(&g, 6.0).is_err());
        // ramp slope maximum
        let h = 1e-6;
        let slope = (cutoff_ramp(1.5 + h) - cutoff_ramp(1.5 - h)) / (2.0 * h);
        assert!((slope - CUTOFF_SLOPE).abs() < 1e-8);
    }

    #[test]
    fn two_dimensional_transform_round_trip() {
        let g = Grid::new(2, 4.0, 16).unwrap();
        let u = Field::from_fn(g, |x| (-(x[0] * x[0] + 0.5 * x[1] * x[1])).exp() + 0.1 * x[0]);
        let back = Field::from_spectrum(g, u.spectrum().to_vec());
        for (a, b) in u.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((u.l2_norm() - u.l2_norm_spectral()).abs() < 1e-12 * u.l2_norm());
    }

    #[test]
    fn mutation_invalidates_spectrum() {
        let g = grid1(16, 1.0);
        let mut u = Field::zeros(g);
        assert_eq!(u.spectrum()[0].re, 0.0);
        u.values_mut()[0] = 1.0;
        assert_eq!(u.spectrum()[0].re, 1.0);
    }

    #[test]
    fn snapshot_round_trip_and_layout() {
        let g = grid1(16, 2.5);
        let u = Field::from_fn(g, |x| x[0]);
        let mut buf = Vec::new();
        u.write_snapshot(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"APFX");
        assert_eq!(&buf[4..6], &[1, 0]);
        assert_eq!(buf[6], 1);
        assert_eq!(&buf[7..11], &16u32.to_le_bytes());
        assert_eq!(buf.len(), 4 + 2 + 1 + 4 + 8 + 16 * 8);
        let back = Field::read_snapshot(&buf[..]).unwrap();
        assert_eq!(back, u);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Field::read_snapshot(&bad[..]).is_err());
    }

    #[test]
    fn sup_embedding_constant_matches_continuum_in_1d() {
        // continuum value on ℝ is 1/√2
        let g = grid1(4096, 200.0);
        assert!((g.sup_embedding_constant() - 0.5f64.sqrt()).abs() < 1e-2);
    }
}
