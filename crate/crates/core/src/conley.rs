//! Spectrum of `−Δ − V` with Dirichlet walls, negative multiplicity,
//! non-resonance and the symbolic homotopy index.

use std::fmt;

use nalgebra::DMatrix;

use crate::coefficients::{NonlinearitySpec, SpatialKind, SpatialProfile};
use crate::error::{Error, Result};

/// Largest 2D matrix order handled by the dense solver.
pub const MAX_DENSE_ORDER: usize = 4096;

const DENSE_EPS: f64 = 1e-13;
const DENSE_MAX_ITER: usize = 10_000;

/// `V = −V1 + V2`, with `V1 ≥ ν̃ > 0` and `V2` decaying.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub dim: usize,
    pub nu_tilde: f64,
    pub v1: Vec<SpatialProfile>,
    pub v2: Vec<SpatialProfile>,
}

impl PotentialSpec {
    pub fn new(dim: usize, nu_tilde: f64, v1: Vec<SpatialProfile>, v2: Vec<SpatialProfile>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Dimension(format!("potential dimension must be 1 or 2, got {dim}")));
        }
        if !(nu_tilde > 0.0) {
            return Err(Error::Hypothesis(format!("nu_tilde must be positive, got {nu_tilde}")));
        }
        for g in &v2 {
            g.validate()?;
            if !g.is_decaying() {
                return Err(Error::Hypothesis(format!("V2 term {g} does not decay")));
            }
        }
        for g in &v1 {
            g.validate()?;
        }
        Ok(Self { dim, nu_tilde, v1, v2 })
    }

    /// `V1 ≡ ν̃`.
    pub fn constant_shift(dim: usize, nu_tilde: f64, v2: Vec<SpatialProfile>) -> Result<Self> {
        Self::new(dim, nu_tilde, vec![SpatialProfile::constant(nu_tilde)], v2)
    }

    pub fn v1_at(&self, x: &[f64]) -> f64 {
        self.v1.iter().map(|g| g.eval(x)).sum()
    }

    pub fn v2_at(&self, x: &[f64]) -> f64 {
        self.v2.iter().map(|g| g.eval(x)).sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.v2_at(x) - self.v1_at(x)
    }
}

/// Interior nodes `−L + (i+1)h`, `h = 2L/(n+1)`.
pub fn dirichlet_nodes(half_width: f64, n: usize) -> (Vec<f64>, f64) {
    let h = 2.0 * half_width / (n + 1) as f64;
    ((0..n).map(|i| -half_width + (i + 1) as f64 * h).collect(), h)
}

fn check_v1(v: &PotentialSpec, x: &[f64]) -> Result<()> {
    let v1 = v.v1_at(x);
    if v1 < v.nu_tilde * (1.0 - 1e-12) {
        return Err(Error::Hypothesis(format!(
            "V1 = {v1} below nu_tilde = {} at x = {x:?}",
            v.nu_tilde
        )));
    }
    Ok(())
}

/// Symmetric tridiagonal matrix with constant off-diagonal `off`.
#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |a, &d| a.min(d - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d + r));
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn tridiagonal_1d(v: &PotentialSpec, half_width: f64, n: usize) -> Result<Tridiagonal> {
    let (nodes, h) = dirichlet_nodes(half_width, n);
    let inv = 1.0 / (h * h);
    let mut diag = Vec::with_capacity(n);
    for x in nodes {
        check_v1(v, &[x])?;
        diag.push(2.0 * inv - v.value(&[x]));
    }
    Ok(Tridiagonal { diag, off: -inv })
}

fn dense_2d(v: &PotentialSpec, half_width: f64, n: usize) -> Result<DMatrix<f64>> {
    let order = n * n;
    if order > MAX_DENSE_ORDER {
        return Err(Error::Domain(format!(
            "2D eigenproblem of order {order} exceeds the dense limit {MAX_DENSE_ORDER}"
        )));
    }
    let (nodes, h) = dirichlet_nodes(half_width, n);
    let inv = 1.0 / (h * h);
    let mut a = DMatrix::zeros(order, order);
    for i in 0..n {
        for j in 0..n {
            let p = i * n + j;
            let x = [nodes[i], nodes[j]];
            check_v1(v, &x)?;
            a[(p, p)] = 4.0 * inv - v.value(&x);
            if i + 1 < n {
                a[(p, p + n)] = -inv;
                a[(p + n, p)] = -inv;
            }
            if j + 1 < n {
                a[(p, p + 1)] = -inv;
                a[(p + 1, p)] = -inv;
            }
        }
    }
    Ok(a)
}

fn dense_eigenvalues(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let order = a.nrows();
    let norm = a.norm();
    let eig = a
        .try_symmetric_eigen(DENSE_EPS, DENSE_MAX_ITER)
        .ok_or_else(|| Error::Numeric(format!(
            "symmetric eigensolver did not converge (order {order}, Frobenius norm {norm:e}, {DENSE_MAX_ITER} sweeps)"
        )))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Lowest `n_eigs` eigenvalues of the central-difference `−Δ − V` on
/// `(−L, L)^N` with `n` interior points per axis, ascending.
pub fn schrodinger_spectrum(v: &PotentialSpec, half_width: f64, n: usize, n_eigs: usize) -> Result<Vec<f64>> {
    if !(half_width > 0.0) || n < 3 {
        return Err(Error::config("spectrum needs L > 0 and at least 3 interior points"));
    }
    let order = n.pow(v.dim as u32);
    if n_eigs > order {
        return Err(Error::Domain(format!("requested {n_eigs} eigenvalues of an order-{order} matrix")));
    }
    match v.dim {
        1 => {
            let t = tridiagonal_1d(v, half_width, n)?;
            Ok((0..n_eigs).map(|k| t.eigenvalue(k)).collect())
        }
        _ => {
            let mut vals = dense_eigenvalues(dense_2d(v, half_width, n)?)?;
            vals.truncate(n_eigs);
            Ok(vals)
        }
    }
}

/// Count of eigenvalues `< −tol_neg`.
pub fn negative_multiplicity(eigs: &[f64], tol_neg: f64) -> usize {
    eigs.iter().filter(|&&e| e < -tol_neg).count()
}

/// `min |λ| > tol_ker`.
pub fn nonresonance_check(eigs: &[f64], tol_ker: f64) -> bool {
    eigs.iter().all(|e| e.abs() > tol_ker)
}

/// Symbolic pointed homotopy type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HomotopyType {
    Trivial0,
    Sphere(usize),
    SmashSymbolSpace(Box<HomotopyType>),
}

impl HomotopyType {
    /// `Σ ∧ inner`; smashing with the trivial index gives the trivial index.
    pub fn smash_symbol_space(inner: HomotopyType) -> Self {
        match inner {
            HomotopyType::Trivial0 => HomotopyType::Trivial0,
            other => HomotopyType::SmashSymbolSpace(Box::new(other)),
        }
    }

    /// Non-contractibility, as a predicate on the symbolic value.
    pub fn nontrivial(&self) -> bool {
        !matches!(self, HomotopyType::Trivial0)
    }
}

impl fmt::Display for HomotopyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HomotopyType::Trivial0 => write!(f, "Trivial0"),
            HomotopyType::Sphere(m) => write!(f, "Sphere({m})"),
            HomotopyType::SmashSymbolSpace(inner) => write!(f, "Smash(SymbolSpace, {inner})"),
        }
    }
}

pub fn homotopy_index(m: usize, include_symbol_space: bool) -> HomotopyType {
    let s = HomotopyType::Sphere(m);
    if include_symbol_space {
        HomotopyType::smash_symbol_space(s)
    } else {
        s
    }
}

/// Reads `V(x) = Σ s̄ g(x) lim ψ(u)/u` off an autonomous nonlinearity.
/// Constant-profile terms form `V1 = ν̃`; the rest form `V2`.
pub fn asymptotic_potential(f_bar: &NonlinearitySpec, dim: usize) -> Result<PotentialSpec> {
    let mut shift = 0.0;
    let mut v2 = Vec::new();
    for t in &f_bar.terms {
        let slope = t.psi.asymptotic_slope().ok_or_else(|| {
            Error::NotAsymptoticallyLinear(format!("profile {} has no finite limit of psi(u)/u", t.psi.name()))
        })?;
        let coeff = t.signal.mean() * slope;
        if coeff == 0.0 {
            continue;
        }
        if t.space.kind == SpatialKind::Constant {
            shift += coeff * t.space.amplitude;
        } else {
            v2.push(SpatialProfile { amplitude: coeff * t.space.amplitude, ..t.space });
        }
    }
    let nu_tilde = -shift;
    if !(nu_tilde > 0.0) {
        return Err(Error::Hypothesis(format!(
            "asymptotic potential has V1 = {nu_tilde}; a positive constant part is required"
        )));
    }
    PotentialSpec::new(dim, nu_tilde, vec![SpatialProfile::constant(nu_tilde)], v2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexOptions {
    pub half_width: f64,
    pub n: usize,
    pub tol_neg: Option<f64>,
    pub tol_ker: Option<f64>,
    pub include_symbol_space: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    /// Eigenvalues below `ν̃/2`, ascending.
    pub eigenvalues: Vec<f64>,
    pub m: usize,
    pub nonresonant: bool,
    /// Some eigenvalue lies in `[−tol_neg, −tol_ker)`.
    pub ambiguous: bool,
    pub index: HomotopyType,
    pub tol_neg: f64,
    pub tol_ker: f64,
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
}

/// Full index computation: spectrum below `ν̃/2`, `m`, non-resonance over
/// the whole discrete spectrum, and the symbolic index.
pub fn index_report(v: &PotentialSpec, opts: &IndexOptions) -> Result<IndexReport> {
    let window = 0.5 * v.nu_tilde;
    let tol_neg = opts.tol_neg.unwrap_or(1e-6 * v.nu_tilde);
    let (eigenvalues, nonresonant, tol_ker) = match v.dim {
        1 => {
            let t = tridiagonal_1d(v, opts.half_width, opts.n)?;
            let (lo, hi) = t.gershgorin();
            let tol_ker = opts.tol_ker.unwrap_or(1e-8 * (hi - lo));
            let count = t.count_below(window);
            let eigs: Vec<f64> = (0..count).map(|k| t.eigenvalue(k)).collect();
            let in_kernel = t.count_below(tol_ker) - t.count_below(-tol_ker);
            (eigs, in_kernel == 0, tol_ker)
        }
        _ => {
            let all = dense_eigenvalues(dense_2d(v, opts.half_width, opts.n)?)?;
            let tol_ker = opts.tol_ker.unwrap_or(1e-8 * (all[all.len() - 1] - all[0]));
            let nonres = nonresonance_check(&all, tol_ker);
            (all.into_iter().filter(|&e| e < window).collect(), nonres, tol_ker)
        }
    };
    let m = negative_multiplicity(&eigenvalues, tol_neg);
    let ambiguous = eigenvalues.iter().any(|&e| e >= -tol_neg && e < -tol_ker);
    Ok(IndexReport {
        index: homotopy_index(m, opts.include_symbol_space),
        eigenvalues,
        m,
        nonresonant,
        ambiguous,
        tol_neg,
        tol_ker,
        dim: v.dim,
        half_width: opts.half_width,
        n: opts.n,
    })
}
