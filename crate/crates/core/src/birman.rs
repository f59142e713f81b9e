//! Nyström discretisation of the Birman–Schwinger operator
//! `B_V(λ) = (V/|V|^{1/2}) R_0(λ) |V|^{1/2}` restricted to one angular mode.
//!
//! On the half line (after the unitary map `u = r^{(d−1)/2} ψ`) the mode-ℓ
//! free resolvent has kernel
//!
//! ```text
//! G(x, y) = iλ·x·y·j_n(λ·min(x,y))·h_n(λ·max(x,y)),
//! ```
//!
//! which is continuous with a kink on the diagonal. The kink is handled by
//! singularity subtraction: the diagonal weight is replaced by the exact row
//! integral of the kernel minus the quadrature of the off-diagonal part.
//!
//! In the lower half-plane `h⁽¹⁾ = 2j − h⁽²⁾` splits the kernel into a
//! bounded part and the rank-one term `2iλ·x·j_n(λx)·y·j_n(λy)`, which carries
//! all of the exponential growth. Determinants use the matrix determinant
//! lemma on that split and eigenvalues at `λ = −is` come from the secular
//! equation, so neither ever forms `I + M²` explicitly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

use crate::error::{ensure_finite, Error, Result};
use crate::quadrature::gauss_legendre;
use crate::resonance::PotentialSpec;
use crate::specfun::{h1_reduced, h2_reduced, harmonic_multiplicity, j_reduced, HalfIntOrder};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const MIN_NODES: usize = 16;
/// Points per sub-interval for the diagonal row integrals.
const ROW_RULE: usize = 12;

type Profile = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Radial potential supported in `[0, support_radius]`. `breaks` lists the
/// radii where the profile may jump; quadrature panels end there.
#[derive(Clone)]
pub struct RadialPotential {
    dim: u32,
    support_radius: f64,
    breaks: Vec<f64>,
    profile: Profile,
}

impl fmt::Debug for RadialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialPotential")
            .field("dim", &self.dim)
            .field("support_radius", &self.support_radius)
            .field("breaks", &self.breaks)
            .finish_non_exhaustive()
    }
}

impl RadialPotential {
    pub fn from_fn(
        dim: u32,
        support_radius: f64,
        breaks: &[f64],
        profile: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        HalfIntOrder::new(0, dim)?;
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("support radius must be positive, got {support_radius}")));
        }
        let mut b: Vec<f64> = breaks.iter().copied().filter(|&r| r > 0.0 && r < support_radius).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        Ok(Self { dim, support_radius, breaks: b, profile: Arc::new(profile) })
    }

    /// `coupling · χ_{|x| < radius}`.
    pub fn ball(dim: u32, radius: f64, coupling: Complex64) -> Result<Self> {
        Self::steps(dim, &[(radius, coupling)])
    }

    /// `Σ c_k χ_{|x| < r_k}`.
    pub fn steps(dim: u32, steps: &[(f64, Complex64)]) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("no steps given".into()));
        }
        for (r, c) in steps {
            ensure_finite(*c, "step value")?;
            if !(*r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("step radius must be positive, got {r}")));
            }
        }
        let support = steps.iter().map(|s| s.0).fold(0.0, f64::max);
        let radii: Vec<f64> = steps.iter().map(|s| s.0).collect();
        let owned = steps.to_vec();
        Self::from_fn(dim, support, &radii, move |r| owned.iter().filter(|(rk, _)| r < *rk).map(|(_, c)| c).sum())
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn value(&self, r: f64) -> Complex64 {
        if r < 0.0 || r > self.support_radius {
            ZERO
        } else {
            (self.profile)(r)
        }
    }
}

impl From<&PotentialSpec> for RadialPotential {
    fn from(spec: &PotentialSpec) -> Self {
        Self::ball(spec.dim, spec.radius, spec.coupling).expect("spec already validated")
    }
}

/// Gauss–Legendre nodes on `[0, radius]`, one panel per piece between breaks.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrid {
    pub radius: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NodeGrid {
    /// About `n` nodes in total, split over the panels in proportion to length
    /// (at least 8 per panel).
    pub fn new(radius: f64, breaks: &[f64], n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::Configuration(format!("need at least {MIN_NODES} nodes, got {n}")));
        }
        let mut edges = vec![0.0];
        edges.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < radius));
        edges.push(radius);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut nodes = Vec::with_capacity(n + 8 * edges.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in edges.windows(2) {
            let len = pair[1] - pair[0];
            let count = ((n as f64 * len / radius).round() as usize).max(8);
            let (x, w) = gauss_legendre(count);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(pair[0] + 0.5 * len * (xi + 1.0));
                weights.push(0.5 * len * wi);
            }
        }
        Ok(Self { radius, nodes, weights })
    }

    pub fn for_potential(pot: &RadialPotential, n: usize) -> Result<Self> {
        Self::new(pot.support_radius, &pot.breaks, n)
    }

    /// Common grid for several potentials: union of breaks, largest support.
    pub fn shared(pots: &[&RadialPotential], n: usize) -> Result<Self> {
        let radius = pots.iter().map(|p| p.support_radius).fold(0.0, f64::max);
        let breaks: Vec<f64> = pots.iter().flat_map(|p| p.breaks.iter().copied().chain([p.support_radius])).collect();
        Self::new(radius, &breaks, n)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Default node count `max(64, ⌈8|λ|a⌉)`.
pub fn default_nodes(lambda_abs: f64, radius: f64) -> usize {
    64usize.max((8.0 * lambda_abs * radius).ceil() as usize)
}

#[derive(Debug, Clone)]
struct RankOne {
    beta: Complex64,
    u: DVector<Complex64>,
    v: DVector<Complex64>,
}

/// Symmetrised Nyström matrix of `B_{V,ℓ}(λ)`.
#[derive(Debug, Clone)]
pub struct ModeOperatorMatrix {
    pub ell: u32,
    pub lambda: Complex64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `smooth + β·u·vᵀ`.
    pub entries: DMatrix<Complex64>,
    smooth: DMatrix<Complex64>,
    rank_one: Option<RankOne>,
    real_symmetric: bool,
}

impl ModeOperatorMatrix {
    /// Wrap an arbitrary square matrix (no kernel structure).
    pub fn from_entries(ell: u32, lambda: Complex64, entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        Ok(Self {
            ell,
            lambda,
            nodes: Vec::new(),
            weights: Vec::new(),
            smooth: entries.clone(),
            entries,
            rank_one: None,
            real_symmetric: false,
        })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// True at `λ = −is` for a real nonnegative profile.
    pub fn is_real_symmetric(&self) -> bool {
        self.real_symmetric
    }

    /// `(log det(I + tM), log of a Hadamard-type bound on its modulus)`.
    pub fn log_det_shifted(&self, t: Complex64) -> (Complex64, f64) {
        let n = self.size();
        let mut a = &self.smooth * t;
        for k in 0..n {
            a[(k, k)] += ONE;
        }
        let mut log_scale: f64 = (0..n).map(|k| a.row(k).norm().max(1e-300).ln()).sum();
        let lu = a.lu();
        let mut log = lu.p().determinant::<Complex64>().ln();
        let u = lu.u();
        for k in 0..n {
            let d = u[(k, k)];
            if d == ZERO {
                return (Complex64::new(f64::NEG_INFINITY, 0.0), log_scale);
            }
            log += d.ln();
        }
        if let Some(r1) = &self.rank_one {
            let y = lu.solve(&r1.u).expect("nonsingular after pivot check");
            let c = t * r1.beta * r1.v.dot(&y);
            log += (ONE + c).ln();
            log_scale += (1.0 + c.norm()).ln();
        }
        (log, log_scale)
    }

    /// Sum of [`Self::log_det_shifted`] over several shifts.
    pub fn log_det_product(&self, shifts: &[Complex64]) -> (Complex64, f64) {
        shifts.iter().fold((ZERO, 0.0), |(l, s), &t| {
            let (a, b) = self.log_det_shifted(t);
            (l + a, s + b)
        })
    }

    /// `log det(I + M^{2m})`.
    pub fn log_det_even_power(&self, m: u32) -> Complex64 {
        self.log_det_product(&even_power_shifts(m)).0
    }

    /// `log det(I − (−1)^m M^m)`.
    pub fn log_det_signed_power(&self, m: u32) -> Complex64 {
        self.log_det_product(&signed_power_shifts(m)).0
    }

    /// `det(I − (−1)^m M^m)` by LU of the dense matrix power, for checking the
    /// factorised forms. Only meaningful where `M` is moderate in size.
    pub fn det_signed_power_direct(&self, m: u32) -> Complex64 {
        let n = self.size();
        let mut p = DMatrix::<Complex64>::identity(n, n);
        for _ in 0..m {
            p = &p * &self.entries;
        }
        let sign = Complex64::new(if m.is_multiple_of(2) { -1.0 } else { 1.0 }, 0.0);
        let a = DMatrix::<Complex64>::identity(n, n) + p * sign;
        a.lu().determinant()
    }
}

/// `t_k` with `1 + x^{2m} = ∏ (1 + t_k x)`.
pub fn even_power_shifts(m: u32) -> Vec<Complex64> {
    (0..2 * m)
        .map(|k| -Complex64::from_polar(1.0, std::f64::consts::PI * (2 * k + 1) as f64 / (2 * m) as f64))
        .collect()
}

/// `ω^k`, `ω = e^{2πi/m}`, with `1 − (−x)^m = ∏_{k=1}^{m} (1 + ω^k x)`.
pub fn signed_power_shifts(m: u32) -> Vec<Complex64> {
    (1..=m).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64)).collect()
}

/// Nyström matrix of mode `ell` on the default grid with `n_nodes` nodes.
pub fn mode_kernel(pot: &RadialPotential, ell: u32, lambda: Complex64, n_nodes: usize) -> Result<ModeOperatorMatrix> {
    let grid = NodeGrid::for_potential(pot, n_nodes)?;
    mode_kernel_on(pot, ell, lambda, &grid)
}

/// Nyström matrix of mode `ell` on a given grid.
pub fn mode_kernel_on(
    pot: &RadialPotential,
    ell: u32,
    lambda: Complex64,
    grid: &NodeGrid,
) -> Result<ModeOperatorMatrix> {
    ensure_finite(lambda, "lambda")?;
    if grid.len() < MIN_NODES {
        return Err(Error::Configuration(format!("need at least {MIN_NODES} nodes")));
    }
    let n = HalfIntOrder::new(ell, pot.dim)?.index();
    let x = &grid.nodes;
    let w = &grid.weights;
    let len = x.len();
    let vals: Vec<Complex64> = x.iter().map(|&r| pot.value(r)).collect();
    for v in &vals {
        ensure_finite(*v, "potential value")?;
    }
    let q: Vec<f64> = vals.iter().map(|v| v.norm().sqrt()).collect();
    let p: Vec<Complex64> = vals.iter().zip(&q).map(|(v, q)| if *q == 0.0 { ZERO } else { v / q }).collect();
    let real_symmetric = lambda.re == 0.0 && lambda.im < 0.0 && vals.iter().all(|v| v.im == 0.0 && v.re >= 0.0);
    if vals.iter().all(|v| *v == ZERO) {
        let zero = DMatrix::zeros(len, len);
        return Ok(ModeOperatorMatrix {
            ell,
            lambda,
            nodes: x.clone(),
            weights: w.clone(),
            entries: zero.clone(),
            smooth: zero,
            rank_one: None,
            real_symmetric,
        });
    }

    let split = lambda.im < 0.0;
    let sigma = if split { -I } else { I };
    let hankel = |z: Complex64| if split { h2_reduced(n, z) } else { h1_reduced(n, z) };
    let f: Vec<Complex64> = x.iter().map(|&r| j_reduced(n, lambda * r)).collect();
    let g: Vec<Complex64> = x.iter().map(|&r| hankel(lambda * r)).collect();
    let norm = (2 * n + 1) as f64;

    // kernel without the potential factors; K(x_i, x_j) for i < j
    let mut k = DMatrix::<Complex64>::zeros(len, len);
    for i in 0..len {
        for j in i + 1..len {
            let ratio = (x[i] / x[j]).powi(n as i32);
            let val = sigma * (x[i] * ratio / norm) * f[i] * g[j];
            k[(i, j)] = val;
            k[(j, i)] = val;
        }
    }
    let (phi, psi) = row_integrals(n, lambda, x, grid.radius, &hankel);
    let mut smooth = DMatrix::<Complex64>::zeros(len, len);
    for i in 0..len {
        let exact = sigma / norm * (g[i] * phi[i] + x[i] * f[i] * psi[i]);
        let discrete: Complex64 = (0..len).filter(|&j| j != i).map(|j| w[j] * k[(i, j)]).sum();
        for j in 0..len {
            smooth[(i, j)] =
                if i == j { vals[i] * (exact - discrete) } else { (w[i] * w[j]).sqrt() * p[i] * k[(i, j)] * q[j] };
        }
    }

    let rank_one = split.then(|| {
        let jn: Vec<Complex64> = x
            .iter()
            .zip(&f)
            .map(|(&r, fi)| {
                let z = lambda * r;
                (1..=n).fold(*fi, |acc, m| acc * z / ((2 * m + 1) as f64))
            })
            .collect();
        let u = DVector::from_fn(len, |i, _| w[i].sqrt() * p[i] * x[i] * jn[i]);
        let v = DVector::from_fn(len, |i, _| w[i].sqrt() * q[i] * x[i] * jn[i]);
        RankOne { beta: 2.0 * I * lambda, u, v }
    });
    let mut entries = smooth.clone();
    if let Some(r1) = &rank_one {
        entries += &r1.u * r1.v.transpose() * r1.beta;
    }
    Ok(ModeOperatorMatrix {
        ell,
        lambda,
        nodes: x.clone(),
        weights: w.clone(),
        entries,
        smooth,
        rank_one,
        real_symmetric,
    })
}

fn gauss_on(lo: f64, hi: f64, rule: &(Vec<f64>, Vec<f64>), f: impl Fn(f64) -> Complex64) -> Complex64 {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    rule.0.iter().zip(&rule.1).map(|(t, wt)| *wt * half * f(mid + half * t)).sum()
}

/// `Φ_i = ∫_0^{x_i} y (y/x_i)^n f(λy) dy` and `Ψ_i = ∫_{x_i}^{a} (x_i/y)^n ĥ(λy) dy`,
/// accumulated interval by interval. The powers are absorbed into the
/// integration variable so the peaked weights cost nothing for large `n`.
fn row_integrals(
    n: usize,
    lambda: Complex64,
    x: &[f64],
    a: f64,
    hankel: &impl Fn(Complex64) -> Complex64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let rule = gauss_legendre(ROW_RULE);
    let len = x.len();
    let mut phi = vec![ZERO; len];
    let p = (n + 2) as f64;
    for i in 0..len {
        let (lo, hi) = (if i == 0 { 0.0 } else { x[i - 1] }, x[i]);
        let t0 = (lo / hi).powf(p);
        let piece = hi * hi / p * gauss_on(t0, 1.0, &rule, |t| j_reduced(n, lambda * (hi * t.powf(1.0 / p))));
        let carried = if i == 0 { ZERO } else { phi[i - 1] * (lo / hi).powi(n as i32) };
        phi[i] = carried + piece;
    }
    let mut psi = vec![ZERO; len];
    for i in (0..len).rev() {
        let lo = x[i];
        let hi = if i + 1 < len { x[i + 1] } else { a };
        let piece = if n <= 2 {
            gauss_on(lo, hi, &rule, |y| (lo / y).powi(n as i32) * hankel(lambda * y))
        } else {
            let q = (n - 1) as f64;
            let t1 = (lo / hi).powf(q);
            lo / q * gauss_on(t1, 1.0, &rule, |t| hankel(lambda * (lo * t.powf(-1.0 / q))))
        };
        let carried = if i + 1 < len { psi[i + 1] * (lo / hi).powi(n as i32) } else { ZERO };
        psi[i] = carried + piece;
    }
    (phi, psi)
}

/// Eigenvalues of one mode matrix, sorted by descending modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub mode: u32,
    pub mu: Vec<Complex64>,
    pub discretization_size: usize,
}

impl EigenSpectrum {
    /// `Σ log(1 + μ_j^{2m})`.
    pub fn log_det_even_power(&self, m: u32) -> Complex64 {
        self.mu.iter().map(|mu| (ONE + mu.powu(2 * m)).ln()).sum()
    }
}

pub fn mode_eigenvalues(matrix: &ModeOperatorMatrix) -> Result<EigenSpectrum> {
    let n = matrix.size();
    if matrix.entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numeric(format!("non-finite entries in mode {} matrix", matrix.ell)));
    }
    let mut mu: Vec<Complex64> = if matrix.real_symmetric {
        symmetric_spectrum(matrix).into_iter().map(|v| Complex64::new(v, 0.0)).collect()
    } else {
        let schur = nalgebra::linalg::Schur::try_new(matrix.entries.clone(), 1e-15, 10_000).ok_or_else(|| {
            Error::Numeric(format!(
                "eigenvalue iteration did not converge (mode {}, size {n}, max entry {:e})",
                matrix.ell,
                matrix.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
            ))
        })?;
        schur.eigenvalues().expect("complex Schur form is triangular").iter().copied().collect()
    };
    mu.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(EigenSpectrum { mode: matrix.ell, mu, discretization_size: n })
}

fn symmetric_spectrum(matrix: &ModeOperatorMatrix) -> Vec<f64> {
    let a = matrix.smooth.map(|z| z.re);
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    match &matrix.rank_one {
        None => eig.eigenvalues.iter().copied().collect(),
        Some(r1) => {
            // u carries the phase (−i)^n of j_n(−isx); strip it into ρ
            let peak = r1.u.iter().copied().fold(Complex64::default(), |m, z| if z.norm() > m.norm() { z } else { m });
            let phase = if peak.norm() > 0.0 { peak / peak.norm() } else { Complex64::new(1.0, 0.0) };
            let u = r1.u.map(|z| (z * phase.conj()).re);
            let z = eig.eigenvectors.transpose() * u;
            rank_one_update(eig.eigenvalues.as_slice(), z.as_slice(), (r1.beta * phase * phase).re)
        }
    }
}

/// Eigenvalues of `diag(d) + ρ z zᵀ` from the secular equation
/// `1 + ρ Σ z_j²/(d_j − μ) = 0`. Small eigenvalues keep their accuracy
/// relative to `diag(d)` however large `ρ|z|²` is.
pub fn rank_one_update(d: &[f64], z: &[f64], rho: f64) -> Vec<f64> {
    if rho < 0.0 {
        let neg: Vec<f64> = d.iter().map(|v| -v).collect();
        return rank_one_update(&neg, z, -rho).into_iter().map(|v| -v).collect();
    }
    let mut pairs: Vec<(f64, f64)> = d.iter().copied().zip(z.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let znorm2: f64 = z.iter().map(|v| v * v).sum();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())) + rho * znorm2;
    let tol = 8.0 * f64::EPSILON * scale;
    let mut out = Vec::with_capacity(d.len());
    let mut active: Vec<(f64, f64)> = Vec::with_capacity(d.len());
    for (dk, zk) in pairs {
        if rho * zk.abs() * znorm2.sqrt() <= tol {
            out.push(dk);
            continue;
        }
        if let Some(last) = active.last_mut() {
            if dk - last.0 <= tol {
                // rotate the weight of the previous entry into this one
                out.push(last.0);
                *last = (dk, last.1.hypot(zk));
                continue;
            }
        }
        active.push((dk, zk));
    }
    let zsq: Vec<f64> = active.iter().map(|p| p.1 * p.1).collect();
    let top = active.last().map(|p| p.0).unwrap_or(0.0) + rho * zsq.iter().sum::<f64>();
    for k in 0..active.len() {
        let lo = active[k].0;
        let hi = if k + 1 < active.len() { active[k + 1].0 } else { top };
        out.push(secular_root(&active, &zsq, rho, lo, hi));
    }
    out
}

fn secular_root(active: &[(f64, f64)], zsq: &[f64], rho: f64, lo: f64, hi: f64) -> f64 {
    let secular = |origin: f64, tau: f64| {
        1.0 + rho * active.iter().zip(zsq).map(|(p, z2)| z2 / ((p.0 - origin) - tau)).sum::<f64>()
    };
    let half = 0.5 * (hi - lo);
    let (origin, mut a, mut b) = if secular(lo, half) >= 0.0 { (lo, 0.0, half) } else { (hi, -half, 0.0) };
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if secular(origin, mid) >= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 2.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
    }
    origin + 0.5 * (a + b)
}

const MODE_BATCH: u32 = 8;

/// Mode-truncated `log det(I + B(λ)^{2m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct FredholmDet {
    /// Truncated sum plus `tail_estimate`.
    pub log_det: Complex64,
    pub ell_max: u32,
    pub n_nodes: usize,
    /// Estimated contribution of the modes above `ell_max` (already included).
    pub tail_estimate: f64,
    /// Contribution of the last mode summed.
    pub last_term: f64,
}

impl FredholmDet {
    pub fn value(&self) -> Result<Complex64> {
        let v = self.log_det.exp();
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::Range { log_value: self.log_det.re })
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DetOptions {
    /// Nodes per mode; `None` means [`default_nodes`].
    pub n_nodes: Option<usize>,
    /// Stop when the tail-corrected sums over all modes so far and over the
    /// first half of them agree to this fraction, or at the node count.
    pub rel_tol: f64,
    /// Summation runs to at least `4(e|λ|a/2 + margin)` modes.
    pub margin: u32,
    pub mode_budget: u32,
    /// Sum exactly this many modes (`0..=ell`) instead of the adaptive rule.
    pub fixed_ell_max: Option<u32>,
}

impl Default for DetOptions {
    fn default() -> Self {
        Self { n_nodes: None, rel_tol: 1e-7, margin: 10, mode_budget: 20_000, fixed_ell_max: None }
    }
}

fn check_power(power: u32, dim: u32) -> Result<u32> {
    if power == 0 || power % 2 == 1 {
        return Err(Error::InvalidArgument(format!("power must be even and positive, got {power}")));
    }
    let m = power / 2;
    if 4 * m <= dim {
        return Err(Error::Precondition(format!("power {power} too small for trace class in dimension {dim}")));
    }
    Ok(m)
}

/// `∏_ℓ det(I + B_ℓ(λ)^{power})^{m(ℓ)}` in log form.
pub fn fredholm_det(
    pot: &RadialPotential,
    lambda: Complex64,
    power: u32,
    n_nodes: Option<usize>,
) -> Result<FredholmDet> {
    fredholm_det_with(pot, lambda, power, &DetOptions { n_nodes, ..DetOptions::default() })
}

pub fn fredholm_det_with(
    pot: &RadialPotential,
    lambda: Complex64,
    power: u32,
    options: &DetOptions,
) -> Result<FredholmDet> {
    let m = check_power(power, pot.dim)?;
    ensure_finite(lambda, "lambda")?;
    let a = pot.support_radius;
    let n_nodes = options.n_nodes.unwrap_or_else(|| default_nodes(lambda.norm(), a));
    let grid = NodeGrid::for_potential(pot, n_nodes)?;
    let shifts = even_power_shifts(m);
    let term = |ell: u32| -> Result<Complex64> {
        let mat = mode_kernel_on(pot, ell, lambda, &grid)?;
        let log = mat.log_det_product(&shifts).0;
        ensure_finite(log, "mode log-determinant").map_err(|_| Error::Numeric(format!("mode {ell} determinant")))?;
        Ok(log * harmonic_multiplicity(pot.dim, ell) as f64)
    };
    let alpha = (pot.dim as f64 - 2.0) / 2.0;
    let floor = (std::f64::consts::E * lambda.norm() * a / 2.0 - alpha).max(0.0).ceil() as u32 + options.margin;
    // the tail fit uses the last 40% of the terms; with at least `settle`
    // terms they all lie past the turning point ℓ ≈ e|λ|a/2
    let settle = 2 * floor;
    let p = tail_exponent(2 * m, pot.dim);
    let extrapolated = |t: &[Complex64]| t.iter().sum::<Complex64>() + power_tail(t, p);
    // the kernel of mode ℓ peaks in a band of width ~a/ℓ, so terms with ℓ
    // beyond the node count are under-resolved and only add bias
    let cap = (grid.len() as u32).max(2 * settle);
    let mut terms: Vec<Complex64> = Vec::new();
    // fixed, so the stopping mode does not depend on the pool size
    let batch = MODE_BATCH;
    loop {
        let start = terms.len() as u32;
        let end = match options.fixed_ell_max {
            Some(l) => l,
            None => (start + batch - 1).max((2 * settle).min(start + 4 * batch)).min(cap - 1),
        };
        if end >= options.mode_budget {
            return Err(Error::Budget { budget: options.mode_budget });
        }
        let fresh: Vec<Result<Complex64>> = (start..=end).into_par_iter().map(term).collect();
        for t in fresh {
            terms.push(t?);
        }
        if options.fixed_ell_max.is_some() {
            break;
        }
        let n = terms.len();
        if (n as u32) < 2 * settle {
            continue;
        }
        if n as u32 >= cap {
            break;
        }
        // the estimate from half the modes is further off than the full one,
        // so their difference bounds the error of the full estimate
        let full = extrapolated(&terms);
        let half = extrapolated(&terms[..n / 2]);
        if (full - half).norm() <= options.rel_tol * full.norm().max(1e-300) || full == ZERO {
            break;
        }
    }
    let total: Complex64 = terms.iter().sum();
    let tail = power_tail(&terms, tail_exponent(2 * m, pot.dim));
    Ok(FredholmDet {
        log_det: total + tail,
        ell_max: terms.len() as u32 - 1,
        n_nodes: grid.len(),
        tail_estimate: tail.norm(),
        last_term: terms.last().map(|t| t.norm()).unwrap_or(0.0),
    })
}

/// Sum of the omitted terms of a mode series whose terms behave like
/// `C ℓ^{−p} + D ℓ^{−p−1}`. For `log det(I ± B^k)` the power counting
/// `m(ℓ) ~ ℓ^{d−2}`, `tr B_ℓ^k ~ ℓ^{1−2k}` gives `p = 2k + 1 − d`. `C` and `D`
/// are least-squares fits over the last 40% of the terms, which keeps rounding
/// noise in individual terms (differences of nearly equal logarithms) from
/// being multiplied by `L`.
pub(crate) fn power_tail(terms: &[Complex64], p: f64) -> Complex64 {
    let n = terms.len();
    if n < 20 || p <= 1.0 {
        return ZERO;
    }
    let start = n - 2 * n / 5;
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    let (mut r1, mut r2) = (ZERO, ZERO);
    for (k, t) in terms.iter().enumerate().skip(start) {
        let x1 = (k as f64).powf(-p);
        let x2 = x1 / k as f64;
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        r1 += t * x1;
        r2 += t * x2;
    }
    let det = s11 * s22 - s12 * s12;
    let c = (r1 * s22 - r2 * s12) / det;
    let d = (r2 * s11 - r1 * s12) / det;
    let edge = (n - 1) as f64 + 0.5;
    c * edge.powf(1.0 - p) / (p - 1.0) + d * edge.powf(-p) / p
}

/// Decay exponent of the mode terms of `log det(I ± B^k)` in dimension `dim`.
pub(crate) fn tail_exponent(k: u32, dim: u32) -> f64 {
    (2 * k + 1) as f64 - dim as f64
}

/// [`fredholm_det`] at `n` and `2n` nodes over the same modes, with the
/// relative drift between the two.
pub fn fredholm_det_checked(
    pot: &RadialPotential,
    lambda: Complex64,
    power: u32,
    options: &DetOptions,
) -> Result<(FredholmDet, f64)> {
    let coarse = fredholm_det_with(pot, lambda, power, options)?;
    let fine = fredholm_det_with(
        pot,
        lambda,
        power,
        &DetOptions { n_nodes: Some(2 * coarse.n_nodes), fixed_ell_max: Some(coarse.ell_max), ..*options },
    )?;
    let drift = (fine.log_det - coarse.log_det).norm() / fine.log_det.norm().max(1e-300);
    Ok((fine, drift))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secular_matches_dense_eigenvalues() {
        let d = [0.3, -1.2, 2.5, 0.31, 4.0];
        let z = [0.5, 0.1, -0.7, 0.2, 1e-3];
        for rho in [1.7, -0.4, 1e3] {
            let mut got = rank_one_update(&d, &z, rho);
            got.sort_by(f64::total_cmp);
            let zv = DVector::from_row_slice(&z);
            let m = DMatrix::from_diagonal(&DVector::from_row_slice(&d)) + &zv * zv.transpose() * rho;
            let mut want: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12 * (1.0 + w.abs()), "{got:?} {want:?}");
            }
        }
    }

    #[test]
    fn secular_handles_repeated_and_decoupled_entries() {
        let got = rank_one_update(&[1.0, 1.0, 2.0], &[1.0, 1.0, 0.0], 1.0);
        let mut got = got;
        got.sort_by(f64::total_cmp);
        // [[2,1,0],[1,2,0],[0,0,2]] has eigenvalues 1, 2, 3
        assert!((got[0] - 1.0).abs() < 1e-14 && (got[1] - 2.0).abs() < 1e-14 && (got[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn power_shifts_factor_the_polynomials() {
        for m in 1..5u32 {
            let x = Complex64::new(0.37, -0.21);
            let even: Complex64 = even_power_shifts(m).iter().map(|t| ONE + t * x).product();
            assert!((even - (ONE + x.powu(2 * m))).norm() < 1e-14);
            let signed: Complex64 = signed_power_shifts(m).iter().map(|t| ONE + t * x).product();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((signed - (ONE - sign * x.powu(m))).norm() < 1e-14);
        }
    }

    #[test]
    fn grid_respects_breaks() {
        let g = NodeGrid::new(1.0, &[0.5], 64).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.nodes.iter().filter(|&&x| x < 0.5).count(), 32);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
