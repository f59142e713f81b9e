//! Numerical checks built on the Nyström operator: eigenvalue domination for
//! ordered potentials, the zero correspondence of `det(I − (−1)^m B^m)` with
//! resonances of rotated couplings, and the decay of that determinant along
//! rays in the upper half-plane.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::E;

use crate::birman::{
    default_nodes, mode_eigenvalues, mode_kernel_on, power_tail, signed_power_shifts, tail_exponent, NodeGrid,
    RadialPotential,
};
use crate::contour::{Sample, SolverSettings, ZeroFinder};
use crate::error::{Error, Result};
use crate::growth::fit_line;
use crate::resonance::{find_mode_resonances, jost_function, PotentialSpec, Resonance, SearchRegion};
use crate::specfun::harmonic_multiplicity;

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub s: f64,
    pub m: u32,
    /// Largest eigenvalues of the discretised `B²(−is)`, with multiplicity.
    pub eigen_big: Vec<f64>,
    pub eigen_small: Vec<f64>,
    /// `(big_j − small_j) / max(big_j, small_j)`.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub log_det_big: f64,
    pub log_det_small: f64,
    /// `(log_det_big − log_det_small) / max(1, log_det_small)`.
    pub det_margin: f64,
    pub ell_max: u32,
    pub n_nodes: usize,
}

impl DominationReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.min_margin >= -tol && self.det_margin >= -tol
    }
}

fn relative_margin(big: f64, small: f64) -> f64 {
    let scale = big.abs().max(small.abs());
    if scale == 0.0 {
        0.0
    } else {
        (big - small) / scale
    }
}

/// Compare the spectra of `B²(−is)` and `det(I + B^{2m})` for `big ≥ small ≥ 0`,
/// both discretised on one shared grid.
pub fn domination_check(
    big: &RadialPotential,
    small: &RadialPotential,
    s: f64,
    m: u32,
    top_k: usize,
    n_nodes: Option<usize>,
) -> Result<DominationReport> {
    if big.dim() != small.dim() {
        return Err(Error::InvalidArgument("potentials live in different dimensions".into()));
    }
    if !(s > 0.0 && s.is_finite()) || top_k == 0 {
        return Err(Error::InvalidArgument(format!("need s > 0 and top_k > 0, got {s}, {top_k}")));
    }
    if 4 * m <= big.dim() {
        return Err(Error::Precondition(format!("m = {m} too small in dimension {}", big.dim())));
    }
    let radius = big.support_radius().max(small.support_radius());
    let grid = NodeGrid::shared(&[big, small], n_nodes.unwrap_or_else(|| default_nodes(s, radius)))?;
    for &r in &grid.nodes {
        let (b, sm) = (big.value(r), small.value(r));
        if b.im != 0.0 || sm.im != 0.0 || sm.re < 0.0 || b.re < sm.re {
            return Err(Error::Precondition(format!(
                "need big >= small >= 0 real; at r = {r}: big = {b}, small = {sm}"
            )));
        }
    }
    let lambda = Complex64::new(0.0, -s);
    let mode = |pot: &RadialPotential, ell: u32| -> Result<Vec<f64>> {
        let spectrum = mode_eigenvalues(&mode_kernel_on(pot, ell, lambda, &grid)?)?;
        Ok(spectrum.mu.iter().map(|mu| mu.re * mu.re).collect())
    };
    let floor = (E * s * radius / 2.0).ceil() as u32 + 10;
    let mut eigen_big: Vec<f64> = Vec::new();
    let mut eigen_small: Vec<f64> = Vec::new();
    let (mut det_big, mut det_small) = (0.0, 0.0);
    let mut ell = 0u32;
    loop {
        let (sq_big, sq_small) = (mode(big, ell)?, mode(small, ell)?);
        let weight = harmonic_multiplicity(big.dim(), ell);
        let log_det = |sq: &[f64]| sq.iter().map(|v| v.powi(m as i32).ln_1p()).sum::<f64>() * weight as f64;
        let (tb, ts) = (log_det(&sq_big), log_det(&sq_small));
        det_big += tb;
        det_small += ts;
        let keep = |all: &mut Vec<f64>, sq: &[f64]| {
            for v in sq {
                let copies = (weight as usize).min(top_k);
                all.extend(std::iter::repeat_n(*v, copies));
            }
            all.sort_by(|a, b| b.total_cmp(a));
            all.truncate(top_k);
        };
        keep(&mut eigen_big, &sq_big);
        keep(&mut eigen_small, &sq_small);
        let settled = |all: &[f64], sq: &[f64]| all.len() == top_k && sq.first().is_none_or(|v| *v < all[top_k - 1]);
        let quiet = tb < 1e-7 * det_big.max(1e-300) && ts < 1e-7 * det_small.max(1e-300);
        if ell >= floor && settled(&eigen_big, &sq_big) && settled(&eigen_small, &sq_small) && quiet {
            break;
        }
        ell += 1;
    }
    let margins: Vec<f64> = eigen_big.iter().zip(&eigen_small).map(|(b, s)| relative_margin(*b, *s)).collect();
    Ok(DominationReport {
        s,
        m,
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        margins,
        eigen_big,
        eigen_small,
        log_det_big: det_big,
        log_det_small: det_small,
        det_margin: (det_big - det_small) / det_small.max(1.0),
        ell_max: ell,
        n_nodes: grid.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetZero {
    pub ell: u32,
    pub lambda: Complex64,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    pub m: u32,
    pub nystrom_zeros: Vec<DetZero>,
    pub resonances: Vec<Resonance>,
    /// Largest distance over matched pairs.
    pub max_pair_distance: f64,
    /// Zeros (counted with multiplicity) left without a partner within `pair_tol`.
    pub unmatched_zeros: usize,
    pub unmatched_resonances: usize,
    pub pair_tol: f64,
    /// Largest relative difference between the dense and factorised
    /// determinants on the 5×5 check grid.
    pub factorization_error: f64,
    pub ell_max: u32,
    pub n_nodes: usize,
}

impl CrosscheckReport {
    pub fn passed(&self, factorization_tol: f64) -> bool {
        self.unmatched_zeros == 0
            && self.unmatched_resonances == 0
            && self.max_pair_distance <= self.pair_tol
            && self.factorization_error <= factorization_tol
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CrosscheckOptions {
    pub n_nodes: Option<usize>,
    pub tol: f64,
    pub pair_tol: f64,
    /// Modes checked for the factorisation identity.
    pub factorization_modes: u32,
}

impl Default for CrosscheckOptions {
    fn default() -> Self {
        Self { n_nodes: None, tol: 1e-10, pair_tol: 1e-4, factorization_modes: 3 }
    }
}

/// Zeros of `λ ↦ det(I − (−1)^m B_V(λ)^m)` in `region`, mode by mode, paired
/// with the resonances of the couplings `ω^k c`, `ω = e^{2πi/m}`.
pub fn det_zero_crosscheck(
    spec: &PotentialSpec,
    m: u32,
    region: &SearchRegion,
    options: &CrosscheckOptions,
) -> Result<CrosscheckReport> {
    region.validate()?;
    if 2 * m <= spec.dim {
        return Err(Error::Precondition(format!("m = {m} must exceed d/2 = {}", spec.dim as f64 / 2.0)));
    }
    let rect = region.rect();
    let reach = [rect.re_min, rect.re_max]
        .iter()
        .flat_map(|x| [rect.im_min, rect.im_max].map(|y| x.hypot(y)))
        .fold(0.0, f64::max);
    let pot = RadialPotential::from(spec);
    let grid = NodeGrid::for_potential(&pot, options.n_nodes.unwrap_or_else(|| default_nodes(reach, spec.radius)))?;
    let shifts = signed_power_shifts(m);
    let couplings: Vec<PotentialSpec> = shifts.iter().map(|w| spec.with_coupling(w * spec.coupling)).collect();

    let factorization_error = if spec.is_free() {
        0.0
    } else {
        let mut worst: f64 = 0.0;
        for ell in 0..options.factorization_modes {
            for i in 0..5 {
                for j in 0..5 {
                    let z = Complex64::new(
                        rect.re_min + (rect.re_max - rect.re_min) * i as f64 / 4.0,
                        rect.im_min + (rect.im_max - rect.im_min) * j as f64 / 4.0,
                    );
                    let mat = mode_kernel_on(&pot, ell, z, &grid)?;
                    let direct = mat.det_signed_power_direct(m);
                    let factored = mat.log_det_product(&shifts).0.exp();
                    worst = worst.max((direct - factored).norm() / factored.norm());
                }
            }
        }
        worst
    };

    let mode = |ell: u32| -> Result<(Vec<DetZero>, Vec<Resonance>)> {
        if spec.is_free() {
            return Ok((Vec::new(), Vec::new()));
        }
        let f = |z: Complex64| -> Result<Sample> {
            let (log, log_scale) = mode_kernel_on(&pot, ell, z, &grid)?.log_det_product(&shifts);
            Ok(Sample { value: log.exp(), scale: log_scale.exp() })
        };
        let settings = SolverSettings {
            tol: options.tol,
            phase_rate: m as f64 * (2.0 * spec.radius + 1.0),
            tile: (2.0 / spec.radius).min(4.0),
            tag: ell,
            ..SolverSettings::default()
        };
        let zeros = ZeroFinder::new(f, settings)
            .zeros(&rect)?
            .into_iter()
            .map(|z| DetZero { ell, lambda: z.z, multiplicity: z.multiplicity })
            .collect();
        let mut res = Vec::new();
        for c in &couplings {
            res.extend(find_mode_resonances(c, ell, region, options.tol)?);
        }
        Ok((zeros, res))
    };

    let alpha = (spec.dim as f64 - 2.0) / 2.0;
    let floor = (E * reach * spec.radius / 2.0 - alpha).max(0.0).ceil() as u32 + 5;
    let mut per_mode: Vec<(Vec<DetZero>, Vec<Resonance>)> = Vec::new();
    loop {
        let start = per_mode.len() as u32;
        let end = floor.max(start + 3);
        let batch: Vec<Result<_>> = (start..=end).into_par_iter().map(mode).collect();
        for b in batch {
            per_mode.push(b?);
        }
        let n = per_mode.len();
        if per_mode[n - 3..].iter().all(|(z, r)| z.is_empty() && r.is_empty()) {
            break;
        }
    }

    let mut max_pair_distance: f64 = 0.0;
    let (mut unmatched_zeros, mut unmatched_resonances) = (0, 0);
    for (zeros, res) in &per_mode {
        let mut left: Vec<Complex64> =
            zeros.iter().flat_map(|z| std::iter::repeat_n(z.lambda, z.multiplicity as usize)).collect();
        let mut right: Vec<Complex64> =
            res.iter().flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity as usize)).collect();
        // closest pairs first
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                pairs.push(((a - b).norm(), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut used_l, mut used_r) = (vec![false; left.len()], vec![false; right.len()]);
        for (d, i, j) in pairs {
            if d > options.pair_tol || used_l[i] || used_r[j] {
                continue;
            }
            used_l[i] = true;
            used_r[j] = true;
            max_pair_distance = max_pair_distance.max(d);
        }
        unmatched_zeros += used_l.iter().filter(|u| !**u).count();
        unmatched_resonances += used_r.iter().filter(|u| !**u).count();
        left.clear();
        right.clear();
    }
    let ell_max = per_mode.len() as u32 - 1;
    let (nystrom_zeros, resonances): (Vec<Vec<DetZero>>, Vec<Vec<Resonance>>) = per_mode.into_iter().unzip();
    Ok(CrosscheckReport {
        m,
        nystrom_zeros: nystrom_zeros.concat(),
        resonances: resonances.concat(),
        max_pair_distance,
        unmatched_zeros,
        unmatched_resonances,
        pair_tol: options.pair_tol,
        factorization_error,
        ell_max,
        n_nodes: grid.len(),
    })
}

/// Minimum number of modes summed before the tail is extrapolated.
pub const TAIL_MODES: u32 = 1200;

#[derive(Debug, Clone, PartialEq)]
pub struct RayLimitReport {
    pub theta: f64,
    pub radii: Vec<f64>,
    /// `h(re^{iθ}) = det(I − (−1)^m B(re^{iθ})^m)`.
    pub values: Vec<Complex64>,
    pub deviations: Vec<f64>,
    /// Slope of `log|h − 1|` against `log r`; `−∞` when `h ≡ 1`.
    pub exponent: f64,
    pub ell_max: Vec<u32>,
}

impl RayLimitReport {
    pub fn passed(&self, bound: f64) -> bool {
        self.exponent <= bound
    }
}

/// `log h(λ)` from the identity `det(I + t B_{V,ℓ}) = Δ_{tc}/Δ_0`; the
/// algebraically decaying mode tail is extrapolated.
pub fn log_signed_det(spec: &PotentialSpec, m: u32, lambda: Complex64) -> Result<(Complex64, u32)> {
    if spec.is_free() {
        return Ok((Complex64::default(), 0));
    }
    let couplings: Vec<PotentialSpec> =
        signed_power_shifts(m).iter().map(|w| spec.with_coupling(w * spec.coupling)).collect();
    let alpha = (spec.dim as f64 - 2.0) / 2.0;
    let cutoff = (E * lambda.norm() * spec.radius / 2.0 - alpha).max(0.0).ceil() as u32;
    let ell_max = (16 * cutoff).max(TAIL_MODES);
    let terms: Vec<Complex64> = (0..=ell_max)
        .into_par_iter()
        .map(|ell| {
            let mut t = Complex64::default();
            for c in &couplings {
                t += jost_function(c, ell, lambda)?.ln();
            }
            Ok(t * harmonic_multiplicity(spec.dim, ell) as f64)
        })
        .collect::<Result<_>>()?;
    let total: Complex64 = terms.iter().sum();
    let tail = power_tail(&terms, tail_exponent(m, spec.dim));
    Ok((total + tail, ell_max))
}

pub fn ray_limit_check(spec: &PotentialSpec, m: u32, theta: f64, radii: &[f64]) -> Result<RayLimitReport> {
    if 2 * m <= spec.dim {
        return Err(Error::Precondition(format!("m = {m} must exceed d/2 = {}", spec.dim as f64 / 2.0)));
    }
    if !(0.1..=std::f64::consts::PI - 0.1).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta must lie in [0.1, π − 0.1], got {theta}")));
    }
    if radii.len() < 2 || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument("need at least two positive radii".into()));
    }
    let mut values = Vec::with_capacity(radii.len());
    let mut ell_max = Vec::with_capacity(radii.len());
    for &r in radii {
        let (log, l) = log_signed_det(spec, m, Complex64::from_polar(r, theta))?;
        values.push(log.exp());
        ell_max.push(l);
    }
    let deviations: Vec<f64> = values.iter().map(|h| (h - 1.0).norm()).collect();
    let exponent = if deviations.iter().all(|d| *d == 0.0) {
        f64::NEG_INFINITY
    } else {
        let (x, y): (Vec<f64>, Vec<f64>) =
            radii.iter().zip(&deviations).filter(|(_, d)| **d > 0.0).map(|(r, d)| (r.ln(), d.ln())).unzip();
        if x.len() < 2 {
            return Err(Error::InsufficientData("fewer than two nonzero deviations".into()));
        }
        fit_line(&x, &y).0
    };
    Ok(RayLimitReport { theta, radii: radii.to_vec(), values, deviations, exponent, ell_max })
}
