//! Resonances of radial step potentials `V = c·χ_{|x|<a}` in odd dimensions,
//! and the partial-wave scattering matrix on the real axis.
//!
//! Conventions: the Laplacian is nonnegative, `R_V(λ) = (Δ + V − λ²)⁻¹`, and
//! resonances lie in `Im λ < 0`. For mode index `n = ℓ + (d−3)/2` the interior
//! solution is `j_n(κr)` with `κ = sqrt(λ² − c)` (principal branch) and the
//! outgoing exterior solution is `h⁽¹⁾_n(λr)`.
//!
//! Zeros are located on the *reduced* matching function
//!
//! ```text
//! Δ(λ) = (2n+1) f_n(κa) ĥ_{n+1}(λa) − (κa)²/(2n+3) f_{n+1}(κa) ĥ_n(λa)
//! ```
//!
//! with `f_n(z) = (2n+1)!! j_n(z)/z^n` and `ĥ_n(z) = z^{n+1} h⁽¹⁾_n(z)/(2n−1)!!`.
//! `Δ` is entire in `λ`, depends on `κ` only through `κ²`, and equals
//! `−i(2n+1)` identically when `c = 0`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::cmp::Ordering;

use crate::contour::{Sample, SolverSettings, ZeroFinder};
use crate::error::{ensure_finite, Error, Rect, Result};
use crate::specfun::{hankel_reduced_pair, harmonic_multiplicity, j_reduced_pair, HalfIntOrder};

/// `V = coupling · χ_{B(0, radius)}` in `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    pub dim: u32,
    pub radius: f64,
    pub coupling: Complex64,
}

impl PotentialSpec {
    pub fn new(dim: u32, radius: f64, coupling: Complex64) -> Result<Self> {
        HalfIntOrder::new(0, dim)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        ensure_finite(coupling, "coupling")?;
        Ok(Self { dim, radius, coupling })
    }

    pub fn with_coupling(&self, coupling: Complex64) -> Self {
        Self { coupling, ..*self }
    }

    pub fn is_real(&self) -> bool {
        self.coupling.im == 0.0
    }

    pub fn is_free(&self) -> bool {
        self.coupling == Complex64::default()
    }

    pub fn order(&self, ell: u32) -> HalfIntOrder {
        HalfIntOrder::new(ell, self.dim).expect("dimension validated on construction")
    }
}

/// Search rectangle in the lower half-plane. The band `−δ < Im λ` next to the
/// real axis is never searched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub exclusion_strip: f64,
}

impl SearchRegion {
    pub const DEFAULT_STRIP: f64 = 1e-3;

    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let region = Self { re_min, re_max, im_min, im_max, exclusion_strip: Self::DEFAULT_STRIP };
        region.validate()?;
        Ok(region)
    }

    /// `[−r, r] × [−r, −δ]`.
    pub fn for_radius(r_max: f64) -> Self {
        Self {
            re_min: -r_max,
            re_max: r_max,
            im_min: -r_max,
            im_max: -Self::DEFAULT_STRIP,
            exclusion_strip: Self::DEFAULT_STRIP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite());
        if !finite || self.re_min >= self.re_max || self.im_min >= self.top() {
            return Err(Error::InvalidArgument(format!("empty or invalid search region {self:?}")));
        }
        if self.exclusion_strip.is_nan() || self.exclusion_strip <= 0.0 {
            return Err(Error::InvalidArgument("exclusion strip must be positive".into()));
        }
        Ok(())
    }

    /// Upper edge actually searched.
    pub fn top(&self) -> f64 {
        self.im_max.min(-self.exclusion_strip)
    }

    pub fn rect(&self) -> Rect {
        Rect { re_min: self.re_min, re_max: self.re_max, im_min: self.im_min, im_max: self.top() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub lambda: Complex64,
    pub ell: u32,
    /// Winding number of the isolating box.
    pub multiplicity: u32,
    /// Number of spherical harmonics in the mode, `m(ℓ)`.
    pub degeneracy: u64,
    /// `|Δ(λ)|` relative to the size of its two terms.
    pub residual: f64,
    pub rect: Rect,
}

impl Resonance {
    /// Contribution to the counting function.
    pub fn weight(&self) -> u64 {
        self.multiplicity as u64 * self.degeneracy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSet {
    pub spec: PotentialSpec,
    /// Sorted by `|λ|`, then mode, real and imaginary part.
    pub items: Vec<Resonance>,
    pub ell_max: u32,
    pub region: SearchRegion,
    pub complete_below: f64,
}

impl ResonanceSet {
    /// Multiplicity-weighted number of items.
    pub fn total_count(&self) -> u64 {
        self.items.iter().map(Resonance::weight).sum()
    }

    pub fn mode(&self, ell: u32) -> Vec<Resonance> {
        self.items.iter().filter(|r| r.ell == ell).copied().collect()
    }
}

/// Evaluator of the reduced matching function of one mode.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModeFunction {
    n: usize,
    radius: f64,
    coupling: Complex64,
}

impl ModeFunction {
    pub(crate) fn new(spec: &PotentialSpec, ell: u32) -> Self {
        Self { n: spec.order(ell).index(), radius: spec.radius, coupling: spec.coupling }
    }

    /// `Δ(λ)` with the outgoing (`first_kind`) or incoming Hankel function.
    pub(crate) fn eval(&self, lambda: Complex64, first_kind: bool) -> Sample {
        let n = self.n;
        let ka = (lambda * lambda - self.coupling).sqrt() * self.radius;
        let (f0, f1) = j_reduced_pair(n, ka);
        let (h0, h1) = hankel_reduced_pair(n, lambda * self.radius, first_kind);
        let t1 = ((2 * n + 1) as f64) * f0 * h1;
        let t2 = ka * ka / ((2 * n + 3) as f64) * f1 * h0;
        Sample { value: t1 - t2, scale: t1.norm() + t2.norm() }
    }

    /// Value of `Δ` for the free problem.
    pub(crate) fn free_value(&self) -> Complex64 {
        Complex64::new(0.0, -((2 * self.n + 1) as f64))
    }
}

/// Matching determinant `κ^{−n}[κ j_n′(κa) h_n(λa) − λ j_n(κa) h_n′(λa)]`
/// in the spherical normalisation; zero exactly at the poles of the mode-ℓ
/// resolvent. Independent of the branch of `κ`.
pub fn mode_determinant(spec: &PotentialSpec, ell: u32, lambda: Complex64) -> Result<Complex64> {
    ensure_finite(lambda, "lambda")?;
    if lambda == Complex64::default() {
        return Err(Error::Domain("mode determinant is singular at lambda = 0".into()));
    }
    let f = ModeFunction::new(spec, ell);
    let n = f.n as i32;
    let a = spec.radius;
    let za = lambda * a;
    Ok(f.eval(lambda, true).value * a.powi(n - 1) / (((2 * n + 1) as f64) * za.powi(n + 1)))
}

/// Normalised Jost function `Δ_c(λ)/Δ_0(λ)`; entire, equal to 1 for `c = 0`.
pub fn jost_function(spec: &PotentialSpec, ell: u32, lambda: Complex64) -> Result<Complex64> {
    ensure_finite(lambda, "lambda")?;
    let f = ModeFunction::new(spec, ell);
    Ok(f.eval(lambda, true).value / f.free_value())
}

fn solver_settings(spec: &PotentialSpec, ell: u32, tol: f64) -> SolverSettings {
    SolverSettings {
        tol,
        phase_rate: 2.0 * spec.radius + 1.0,
        tile: (2.0 / spec.radius).min(4.0),
        tag: ell,
        ..SolverSettings::default()
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn mode_zeros(
    spec: &PotentialSpec,
    ell: u32,
    rect: &Rect,
    tol: f64,
    keep: impl Fn(&Rect) -> bool + Sync,
) -> Result<Vec<Resonance>> {
    if spec.is_free() {
        return Ok(Vec::new());
    }
    let f = ModeFunction::new(spec, ell);
    let finder = ZeroFinder::new(|z| Ok(f.eval(z, true)), solver_settings(spec, ell, tol));
    let degeneracy = harmonic_multiplicity(spec.dim, ell);
    Ok(finder
        .zeros_where(rect, keep)?
        .into_iter()
        .map(|z| Resonance {
            lambda: z.z,
            ell,
            multiplicity: z.multiplicity,
            degeneracy,
            residual: z.residual,
            rect: z.rect,
        })
        .collect())
}

/// Every zero of the mode-ℓ matching function in `region`.
pub fn find_mode_resonances(spec: &PotentialSpec, ell: u32, region: &SearchRegion, tol: f64) -> Result<Vec<Resonance>> {
    region.validate()?;
    check_tol(tol)?;
    let mut found = mode_zeros(spec, ell, &region.rect(), tol, |_| true)?;
    found.sort_by(compare);
    Ok(found)
}

/// Winding number of the mode-ℓ matching function around `region`.
pub fn mode_winding(spec: &PotentialSpec, ell: u32, region: &SearchRegion) -> Result<i64> {
    region.validate()?;
    if spec.is_free() {
        return Ok(0);
    }
    let f = ModeFunction::new(spec, ell);
    ZeroFinder::new(|z| Ok(f.eval(z, true)), solver_settings(spec, ell, 1e-10)).total_winding(&region.rect())
}

fn compare(a: &Resonance, b: &Resonance) -> Ordering {
    a.lambda
        .norm()
        .total_cmp(&b.lambda.norm())
        .then(a.ell.cmp(&b.ell))
        .then(a.lambda.re.total_cmp(&b.lambda.re))
        .then(a.lambda.im.total_cmp(&b.lambda.im))
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Give up (with an error) rather than search more modes than this.
    pub mode_budget: u32,
    /// Modes searched beyond the Bessel-decay cutoff `ν > e·r·a/2`.
    pub margin: u32,
    /// The sweep stops only after this many consecutive empty modes.
    pub empty_run: u32,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { mode_budget: 2000, margin: 10, empty_run: 5 }
    }
}

/// All resonances with `|λ| < r_max`, over all modes.
pub fn find_resonances(spec: &PotentialSpec, r_max: f64, tol: f64) -> Result<ResonanceSet> {
    find_resonances_with(spec, r_max, tol, &SweepOptions::default())
}

pub fn find_resonances_with(
    spec: &PotentialSpec,
    r_max: f64,
    tol: f64,
    options: &SweepOptions,
) -> Result<ResonanceSet> {
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
    }
    check_tol(tol)?;
    let region = SearchRegion::for_radius(r_max);
    let alpha = (spec.dim as f64 - 2.0) / 2.0;
    let cutoff = std::f64::consts::E * r_max * spec.radius / 2.0 - alpha;
    let mut ell_max = cutoff.max(0.0).ceil() as u32 + options.margin;
    let mut per_mode: Vec<Vec<Resonance>> = Vec::new();
    loop {
        if ell_max >= options.mode_budget {
            return Err(Error::Budget { budget: options.mode_budget });
        }
        let start = per_mode.len() as u32;
        let batch: Vec<Result<Vec<Resonance>>> =
            (start..=ell_max).into_par_iter().map(|ell| sweep_mode(spec, ell, r_max, tol)).collect();
        for modes in batch {
            per_mode.push(modes?);
        }
        let run = options.empty_run as usize;
        let tail_empty = per_mode.len() >= run && per_mode[per_mode.len() - run..].iter().all(Vec::is_empty);
        if tail_empty {
            break;
        }
        ell_max += options.empty_run;
    }
    let mut items: Vec<Resonance> = per_mode.into_iter().flatten().collect();
    items.sort_by(compare);
    Ok(ResonanceSet { spec: *spec, items, ell_max, region, complete_below: r_max })
}

/// Zeros of one mode inside the open disc `|λ| < r_max`, below the strip.
fn sweep_mode(spec: &PotentialSpec, ell: u32, r_max: f64, tol: f64) -> Result<Vec<Resonance>> {
    let region = SearchRegion::for_radius(r_max);
    let near_disc = |t: &Rect| {
        let x = if t.re_min > 0.0 {
            t.re_min
        } else if t.re_max < 0.0 {
            -t.re_max
        } else {
            0.0
        };
        let y = if t.im_max < 0.0 { -t.im_max } else { 0.0 };
        x.hypot(y) < r_max
    };
    let inside = |r: &Resonance| r.lambda.norm() < r_max;
    if !spec.is_real() {
        let found = mode_zeros(spec, ell, &region.rect(), tol, near_disc)?;
        return Ok(found.into_iter().filter(inside).collect());
    }
    // real coupling: Δ(−conj λ) = conj Δ(λ) up to a constant phase, so only
    // Re λ ≥ 0 is searched; the left edge sits slightly left of the axis so
    // zeros on the imaginary axis are interior
    let strip = 0.2713 / spec.radius;
    let mut rect = region.rect();
    rect.re_min = -strip;
    let found: Vec<Resonance> = mode_zeros(spec, ell, &rect, tol, near_disc)?.into_iter().filter(inside).collect();
    let mirror = |r: &Resonance| Resonance {
        lambda: -r.lambda.conj(),
        rect: Rect { re_min: -r.rect.re_max, re_max: -r.rect.re_min, ..r.rect },
        ..*r
    };
    let mut out = Vec::with_capacity(2 * found.len());
    for (i, r) in found.iter().enumerate() {
        if r.lambda.re > strip {
            out.push(*r);
            out.push(mirror(r));
            continue;
        }
        // both sides of the axis were searched here; a zero without a
        // separate mirror partner lies on the axis, off only by Newton's stop
        let image = -r.lambda.conj();
        let near = 1e-6 * r.lambda.norm().max(1.0);
        let partnered = found.iter().enumerate().any(|(j, q)| j != i && (q.lambda - image).norm() < near);
        if !partnered {
            out.push(Resonance { lambda: Complex64::new(0.0, r.lambda.im), ..*r });
        } else if r.lambda.re > 0.0 {
            out.push(*r);
            out.push(mirror(r));
        }
    }
    Ok(out)
}

/// Partial-wave scattering matrix `S_ℓ(λ) = −Δ⁽²⁾(λ)/Δ⁽¹⁾(λ)` at real `λ ≠ 0`,
/// normalised so that `S_ℓ ≡ 1` for the free problem.
pub fn mode_smatrix(spec: &PotentialSpec, ell: u32, lambda: f64) -> Result<Complex64> {
    if !lambda.is_finite() || lambda == 0.0 {
        return Err(Error::Domain(format!("S-matrix needs real nonzero lambda, got {lambda}")));
    }
    let f = ModeFunction::new(spec, ell);
    let z = Complex64::new(lambda, 0.0);
    let outgoing = f.eval(z, true);
    let incoming = f.eval(z, false);
    if outgoing.value.norm() <= 1e-14 * outgoing.scale {
        return Err(Error::Singular(format!("real resonance of mode {ell} at lambda = {lambda}")));
    }
    Ok(-incoming.value / outgoing.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDerivative {
    /// `Σ_ℓ m(ℓ) d/dλ log S_ℓ(λ)`.
    pub value: Complex64,
    /// Bound on the omitted modes, from the last included one.
    pub truncation_error: f64,
    /// Last mode included.
    pub ell_max: u32,
}

/// `d/dλ log det S(λ)` by partial waves, with a fourth-order central difference
/// of `log S_ℓ` in each mode.
pub fn sdet_log_derivative(spec: &PotentialSpec, lambda: f64) -> Result<LogDerivative> {
    sdet_log_derivative_with_step(spec, lambda, 1e-3)
}

pub fn sdet_log_derivative_with_step(spec: &PotentialSpec, lambda: f64, h: f64) -> Result<LogDerivative> {
    if !lambda.is_finite() || lambda.abs() < 1.0 {
        return Err(Error::Domain(format!("need real |lambda| >= 1, got {lambda}")));
    }
    if spec.is_free() {
        return Ok(LogDerivative { value: Complex64::default(), truncation_error: 0.0, ell_max: 0 });
    }
    let mut total = Complex64::default();
    let mut last;
    let mut ell = 0u32;
    // beyond ν ≈ e|λ|a/2 every S_ℓ is 1 to rounding
    let hard_cap = (3.0 * lambda.abs() * spec.radius) as u32 + 200;
    loop {
        let s: Vec<Complex64> =
            [-2.0, -1.0, 1.0, 2.0].iter().map(|k| mode_smatrix(spec, ell, lambda + k * h)).collect::<Result<_>>()?;
        let quiet = s.iter().all(|v| (v - 1.0).norm() < 1e-14);
        // differences of log S taken as logs of ratios, so no unwrapping is needed
        let d1 = (s[2] / s[1]).ln();
        let d2 = (s[3] / s[0]).ln();
        let derivative = (8.0 * d1 - d2) / (12.0 * h);
        let term = derivative * harmonic_multiplicity(spec.dim, ell) as f64;
        total += term;
        last = term.norm();
        if quiet || ell >= hard_cap {
            break;
        }
        ell += 1;
    }
    Ok(LogDerivative { value: total, truncation_error: last, ell_max: ell })
}
