//! Half-integer order Bessel, Hankel and modified Bessel functions.
//!
//! Everything is expressed through the spherical functions
//! `j_n(z) = sqrt(pi/(2z)) J_{n+1/2}(z)` and `h_n(z) = sqrt(pi/(2z)) H^{(1)}_{n+1/2}(z)`,
//! where `n` is the *spherical index*. A radial mode `ell` in odd dimension
//! `dim` has Bessel order `nu = ell + dim/2 - 1`, i.e. spherical index
//! `n = ell + (dim - 3)/2`.
//!
//! Besides the plain values the module exposes two rescaled families that
//! stay representable for large indices and small arguments:
//!
//! * `j_reduced(n, z) = (2n+1)!! j_n(z) / z^n`, an even entire function with value 1 at 0;
//! * `h1_reduced(n, z) = z^{n+1} h_n(z) / (2n-1)!!`, entire, equal to `-i` at 0.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{ensure_finite, Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const SERIES_MAX_TERMS: usize = 400;

/// Angular mode `ell` in odd dimension `dim`, i.e. the Bessel order
/// `nu = ell + dim/2 - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HalfIntOrder {
    ell: u32,
    dim: u32,
}

impl HalfIntOrder {
    pub fn new(ell: u32, dim: u32) -> Result<Self> {
        if dim < 3 || dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("dimension must be odd and >= 3, got {dim}")));
        }
        Ok(Self { ell, dim })
    }

    /// The order with `nu = n + 1/2` (dimension 3, mode `n`).
    pub fn from_index(n: u32) -> Self {
        Self { ell: n, dim: 3 }
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn nu(&self) -> f64 {
        self.ell as f64 + self.dim as f64 / 2.0 - 1.0
    }

    /// Spherical index `n = nu - 1/2`.
    pub fn index(&self) -> usize {
        (self.ell + (self.dim - 3) / 2) as usize
    }
}

/// Below this modulus the ascending series is used for `j_n`.
fn series_threshold(n: usize) -> f64 {
    n.max(1) as f64 / 2.0
}

/// `(2n+1)!! j_n(z) / z^n` by its ascending series.
fn j_reduced_series(n: usize, z: Complex64) -> Complex64 {
    let w = -z * z * 0.5;
    let mut term = ONE;
    let mut sum = ONE;
    for k in 1..=SERIES_MAX_TERMS {
        term *= w / ((k * (2 * n + 2 * k + 1)) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}

/// `prod_{k=1}^{n} (2k+1) / z`, i.e. `(2n+1)!! / z^n`.
fn odd_dfact_over_pow(n: usize, z: Complex64) -> Complex64 {
    let zi = z.inv();
    (1..=n).fold(ONE, |acc, k| acc * ((2 * k + 1) as f64) * zi)
}

/// `(2n-1)!! / z^{n+1}` as a running product.
fn hankel_prefactor(n: usize, z: Complex64) -> Complex64 {
    let zi = z.inv();
    (1..=n).fold(zi, |acc, k| acc * ((2 * k - 1) as f64) * zi)
}

/// `z^{n+1} h_n(z) e^{-sz} / (2n-1)!!` by upward recurrence, which is stable
/// because Hankel functions dominate in `n`. `s = i` gives the first kind,
/// `s = -i` the second.
fn hankel_unwound_reduced(n: usize, z: Complex64, s: Complex64) -> Complex64 {
    hankel_unwound_reduced_pair(n, z, s).0
}

/// Orders `n` and `n + 1` of [`hankel_unwound_reduced`].
fn hankel_unwound_reduced_pair(n: usize, z: Complex64, s: Complex64) -> (Complex64, Complex64) {
    let mut prev = -s;
    let mut cur = -(z + s);
    let z2 = z * z;
    for k in 1..=n {
        let next = cur - z2 * prev / (((2 * k + 1) * (2 * k - 1)) as f64);
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// Upward recurrence for `h^{(1)}` is only stable for `Im z >= 0` (and for
/// `h^{(2)}` on the mirror side); elsewhere the kind is recovered as `2 j_n - h`.
fn needs_reflection(n: usize, z: Complex64, first_kind: bool) -> bool {
    n > 0 && if first_kind { z.im < 0.0 } else { z.im > 0.0 }
}

/// `h^{(1)}_n(z) e^{-iz}`.
fn h1_unwound(n: usize, z: Complex64) -> Complex64 {
    if needs_reflection(n, z, true) {
        let j = j_pair_exp_scaled(n, z).0 * Complex64::from_polar(1.0, -z.re);
        return 2.0 * j - h2_unwound(n, z) * (-2.0 * I * z).exp();
    }
    hankel_unwound_reduced(n, z, I) * hankel_prefactor(n, z)
}

/// `h^{(2)}_n(z) e^{iz}`.
fn h2_unwound(n: usize, z: Complex64) -> Complex64 {
    if needs_reflection(n, z, false) {
        let j = j_pair_exp_scaled(n, z).0 * Complex64::from_polar(1.0, z.re);
        return 2.0 * j - h1_unwound(n, z) * (2.0 * I * z).exp();
    }
    hankel_unwound_reduced(n, z, -I) * hankel_prefactor(n, z)
}

/// `j_{k}/j_{k-1}` by backward recurrence (the minimal-solution ratio).
fn j_ratio(k: usize, z: Complex64) -> Complex64 {
    let start = k.max((1.5 * z.norm()).ceil() as usize) + 30;
    let mut r = z / ((2 * start + 3) as f64);
    for m in (k..=start).rev() {
        r = (((2 * m + 1) as f64) / z - r).inv();
    }
    r
}

/// `(j_n(z), j_{n+1}(z))` multiplied by `e^{-|Im z|}`.
///
/// Large arguments: ratio from backward recurrence, absolute scale from the
/// Wronskian with whichever Hankel function is recessive in the half-plane of `z`.
pub(crate) fn j_pair_exp_scaled(n: usize, z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < series_threshold(n) {
        let damp = (-z.im.abs()).exp();
        let zp = if n == 0 { ONE } else { (1..=n).fold(ONE, |acc, k| acc * z / ((2 * k + 1) as f64)) };
        let jn = zp * j_reduced_series(n, z);
        let jn1 = zp * z / ((2 * n + 3) as f64) * j_reduced_series(n + 1, z);
        return (jn * damp, jn1 * damp);
    }
    let ratio = j_ratio(n + 1, z);
    let z2 = z * z;
    let (wronskian, lo, hi) = if z.im >= 0.0 {
        (-I / z2 * Complex64::from_polar(1.0, -z.re), h1_unwound(n, z), h1_unwound(n + 1, z))
    } else {
        (I / z2 * Complex64::from_polar(1.0, z.re), h2_unwound(n, z), h2_unwound(n + 1, z))
    };
    if ratio.norm() <= 1.0 {
        let jn = wronskian / (hi - ratio * lo);
        (jn, ratio * jn)
    } else {
        let jn1 = wronskian / (hi / ratio - lo);
        (jn1 / ratio, jn1)
    }
}

/// `(2n+1)!! j_n(z) / z^n` and the same for `n+1`; both even entire functions of `z`.
pub fn j_reduced_pair(n: usize, z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < series_threshold(n) {
        return (j_reduced_series(n, z), j_reduced_series(n + 1, z));
    }
    let (a, b) = j_pair_exp_scaled(n, z);
    let grow = z.im.abs().exp();
    let scale = odd_dfact_over_pow(n, z);
    let scale1 = scale * ((2 * n + 3) as f64) / z;
    (a * grow * scale, b * grow * scale1)
}

pub fn j_reduced(n: usize, z: Complex64) -> Complex64 {
    if z.norm() < series_threshold(n) {
        j_reduced_series(n, z)
    } else {
        j_reduced_pair(n, z).0
    }
}

/// `z^{2n+1} / ((2n+1)!! (2n-1)!!)`, which converts `(2n+1)!! j_n / z^n`
/// to the Hankel normalisation.
fn j_to_hankel_scale(n: usize, z: Complex64) -> Complex64 {
    let z2 = z * z;
    (1..=n).fold(z, |acc, k| acc * z2 / (((2 * k - 1) * (2 * k + 1)) as f64))
}

/// `z^{n+1} h^{(1)}_n(z) / (2n-1)!!`.
pub fn h1_reduced(n: usize, z: Complex64) -> Complex64 {
    if needs_reflection(n, z, true) {
        return 2.0 * j_to_hankel_scale(n, z) * j_reduced(n, z) - h2_reduced(n, z);
    }
    (I * z).exp() * hankel_unwound_reduced(n, z, I)
}

/// `z^{n+1} h^{(2)}_n(z) / (2n-1)!!`.
pub fn h2_reduced(n: usize, z: Complex64) -> Complex64 {
    if needs_reflection(n, z, false) {
        return 2.0 * j_to_hankel_scale(n, z) * j_reduced(n, z) - h1_reduced(n, z);
    }
    (-I * z).exp() * hankel_unwound_reduced(n, z, -I)
}

/// [`h1_reduced`] (or [`h2_reduced`] when `first_kind` is false) at orders
/// `n` and `n + 1`, sharing one recurrence.
pub fn hankel_reduced_pair(n: usize, z: Complex64, first_kind: bool) -> (Complex64, Complex64) {
    let s = if first_kind { I } else { -I };
    if needs_reflection(n + 1, z, first_kind) {
        let (f0, f1) = j_reduced_pair(n, z);
        let (g0, g1) = hankel_reduced_pair(n, z, !first_kind);
        let s0 = j_to_hankel_scale(n, z);
        let s1 = s0 * z * z / (((2 * n + 1) * (2 * n + 3)) as f64);
        return (2.0 * s0 * f0 - g0, 2.0 * s1 * f1 - g1);
    }
    let (u0, u1) = hankel_unwound_reduced_pair(n, z, s);
    let e = (s * z).exp();
    (e * u0, e * u1)
}

pub(crate) fn sph_j(n: usize, z: Complex64) -> Complex64 {
    if z == Complex64::default() {
        return if n == 0 { ONE } else { Complex64::default() };
    }
    j_pair_exp_scaled(n, z).0 * z.im.abs().exp()
}

pub(crate) fn sph_h1(n: usize, z: Complex64) -> Complex64 {
    h1_unwound(n, z) * (I * z).exp()
}

pub(crate) fn sph_h2(n: usize, z: Complex64) -> Complex64 {
    h2_unwound(n, z) * (-I * z).exp()
}

/// Spherical Bessel function `j_n(z)` for the given half-integer order,
/// so that `J_nu(z) = sqrt(2z/pi) * spherical_j(order, z)`.
pub fn spherical_j(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    ensure_finite(z, "argument")?;
    Ok(sph_j(order.index(), z))
}

/// `j_n(z) e^{-|Im z|}`.
pub fn spherical_j_scaled(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    ensure_finite(z, "argument")?;
    if z == Complex64::default() {
        return Ok(if order.index() == 0 { ONE } else { Complex64::default() });
    }
    Ok(j_pair_exp_scaled(order.index(), z).0)
}

/// Spherical Hankel function of the first kind, closed form.
pub fn spherical_h1(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    ensure_finite(z, "argument")?;
    if z == Complex64::default() {
        return Err(Error::Pole("spherical Hankel function at z = 0".into()));
    }
    Ok(sph_h1(order.index(), z))
}

/// `h^{(1)}_n(z) e^{-iz}`.
pub fn spherical_h1_scaled(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    ensure_finite(z, "argument")?;
    if z == Complex64::default() {
        return Err(Error::Pole("spherical Hankel function at z = 0".into()));
    }
    Ok(h1_unwound(order.index(), z))
}

/// Spherical Hankel function of the second kind.
pub fn spherical_h2(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    ensure_finite(z, "argument")?;
    if z == Complex64::default() {
        return Err(Error::Pole("spherical Hankel function at z = 0".into()));
    }
    Ok(sph_h2(order.index(), z))
}

/// `sqrt(2z/pi)` on the principal branch.
pub fn cylinder_factor(z: Complex64) -> Complex64 {
    (z * (2.0 / PI)).sqrt()
}

/// `J_nu(z)` for half-integer `nu`.
pub fn bessel_j(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    Ok(cylinder_factor(z) * spherical_j(order, z)?)
}

/// `H^{(1)}_nu(z)` for half-integer `nu`.
pub fn hankel_h1(order: HalfIntOrder, z: Complex64) -> Result<Complex64> {
    Ok(cylinder_factor(z) * spherical_h1(order, z)?)
}

/// `ln |J_nu(z)|` without overflow for large `|Im z|`.
pub fn ln_abs_bessel_j(order: HalfIntOrder, z: Complex64) -> Result<f64> {
    let scaled = spherical_j_scaled(order, z)?;
    Ok(cylinder_factor(z).norm().ln() + scaled.norm().ln() + z.im.abs())
}

/// `ln |H^{(1)}_nu(z)|` without overflow for large `|Im z|`.
pub fn ln_abs_hankel_h1(order: HalfIntOrder, z: Complex64) -> Result<f64> {
    let scaled = spherical_h1_scaled(order, z)?;
    Ok(cylinder_factor(z).norm().ln() + scaled.norm().ln() - z.im)
}

/// Modified Bessel functions `(I_nu(s), K_nu(s))` for half-integer `nu` and `s > 0`.
///
/// `I` comes from Miller's downward recurrence normalised against
/// `I_{1/2}(s) = sqrt(2/(pi s)) sinh s`; `K` from upward recurrence starting at
/// `K_{1/2}(s) = sqrt(pi/(2s)) e^{-s}`.
pub fn modified_ik(order: HalfIntOrder, s: f64) -> Result<(f64, f64)> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain(format!("modified Bessel functions need s > 0, got {s}")));
    }
    let n = order.index();
    Ok((modified_i(n, s), modified_k(n, s)))
}

fn modified_i(n: usize, s: f64) -> f64 {
    let top = n.max(s.ceil() as usize) + 30 + (40.0 * (n.max(1) as f64)).sqrt().ceil() as usize;
    // index k stands for order k + 1/2
    let mut above = 0.0_f64;
    let mut current = 1e-300_f64;
    let mut at_n = if top == n { current } else { 0.0 };
    for k in (0..top).rev() {
        let nu = k as f64 + 1.5;
        let below = above + 2.0 * nu / s * current;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            at_n *= 1e-250;
        }
        if k == n {
            at_n = current;
        }
    }
    let exact_half = (2.0 / (PI * s)).sqrt() * s.sinh();
    at_n * (exact_half / current)
}

fn modified_k(n: usize, s: f64) -> f64 {
    let mut prev = (PI / (2.0 * s)).sqrt() * (-s).exp();
    if n == 0 {
        return prev;
    }
    let mut cur = prev * (1.0 + 1.0 / s);
    for k in 1..n {
        let nu = k as f64 + 0.5;
        let next = prev + 2.0 * nu / s * cur;
        prev = cur;
        cur = next;
    }
    cur
}

/// Dimension of the space of degree-`ell` spherical harmonics on `S^{dim-1}`:
/// `(2 ell + dim - 2) (ell + dim - 3)! / ((dim - 2)! ell!)`.
pub fn harmonic_multiplicity(dim: u32, ell: u32) -> u64 {
    if ell == 0 {
        return 1;
    }
    // binom(ell + dim - 3, dim - 3) computed exactly in u128
    let d3 = (dim - 3) as u128;
    let mut binom: u128 = 1;
    for k in 1..=d3 {
        binom = binom * (ell as u128 + k) / k;
    }
    let total = (2 * ell as u128 + dim as u128 - 2) * binom / (dim as u128 - 2);
    total as u64
}
