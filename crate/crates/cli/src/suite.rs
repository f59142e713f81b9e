//! Invariant checks run by `bessel-check` and `verify`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use reslab_core::birman::RadialPotential;
use reslab_core::checks::{
    det_zero_crosscheck, domination_check, ray_limit_check, CrosscheckOptions, CrosscheckReport,
};
use reslab_core::growth::fit_line;
use reslab_core::resonance::{find_mode_resonances, mode_smatrix, sdet_log_derivative, PotentialSpec, SearchRegion};
use reslab_core::specfun::{
    bessel_j, hankel_h1, ln_abs_bessel_j, ln_abs_hankel_h1, modified_ik, spherical_h1, spherical_h2, spherical_j,
    HalfIntOrder,
};

use crate::error::CliError;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against the threshold.
    pub metric: f64,
    pub threshold: f64,
}

impl Check {
    fn below(name: &str, metric: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: metric <= threshold, metric, threshold }
    }

    fn above(name: &str, metric: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: metric >= threshold, metric, threshold }
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

fn order(n: u32) -> HalfIntOrder {
    HalfIntOrder::from_index(n)
}

fn s_grid() -> Vec<f64> {
    let mut v = vec![0.5, 1.0];
    v.extend((2..=32).map(f64::from));
    v
}

/// `|J_ν(−is)| = I_ν(s)` for `ν = n + 1/2 ≤ 81/2`.
pub fn bessel_modulus_identity() -> Result<Check, CliError> {
    let mut worst = 0.0f64;
    for n in 0..=40 {
        for s in s_grid() {
            let j = bessel_j(order(n), Complex64::new(0.0, -s))?;
            let (i, _) = modified_ik(order(n), s)?;
            worst = worst.max((j.norm() - i).abs() / i);
        }
    }
    Ok(Check::below("bessel_modulus_identity", worst, 1e-9))
}

/// `H⁽¹⁾_ν(−is) = (2i/π)e^{−3νπi/2}K_ν(s) + 2e^{−νπi/2}I_ν(s)`, measured
/// against the larger of the two terms (the sum vanishes at `ν = 3/2, s = 1`).
pub fn hankel_continuation_identity() -> Result<Check, CliError> {
    let mut worst = 0.0f64;
    for n in 0..=40 {
        let nu = n as f64 + 0.5;
        for s in s_grid() {
            let h = hankel_h1(order(n), Complex64::new(0.0, -s))?;
            let (i, k) = modified_ik(order(n), s)?;
            let k_term = (2.0 * I / PI) * Complex64::from_polar(1.0, -1.5 * nu * PI) * k;
            let i_term = 2.0 * Complex64::from_polar(1.0, -0.5 * nu * PI) * i;
            worst = worst.max((h - k_term - i_term).norm() / k_term.norm().max(i_term.norm()));
        }
    }
    Ok(Check::below("hankel_continuation_identity", worst, 1e-9))
}

fn derivative(f: impl Fn(u32) -> Result<Complex64, CliError>, ell: u32, z: Complex64) -> Result<Complex64, CliError> {
    Ok(if ell == 0 { -f(1)? } else { f(ell - 1)? - (ell + 1) as f64 / z * f(ell)? })
}

/// `j h' − j' h = ±i/z²`, with `h⁽¹⁾` on the closed upper half-plane and
/// `h⁽²⁾` below it, where `h⁽¹⁾` cannot be resolved against `j`.
pub fn wronskian_identity() -> Result<Check, CliError> {
    let radii = [0.1, 0.37, 1.0, 3.3, 10.0, 31.0, 100.0];
    // 3.14159 and -1.5708 sit just off the cut and the negative imaginary axis
    #[allow(clippy::approx_constant)]
    let phases = [0.0, 0.4, 1.3, 2.2, 3.0, 3.14159, -0.3, -1.1, -1.5708, -2.5];
    let mut worst = 0.0f64;
    for ell in 0..=40u32 {
        for &r in &radii {
            for &p in &phases {
                let z = Complex64::from_polar(r, p);
                let j = |k: u32| Ok(spherical_j(order(k), z)?);
                let upper = z.im >= 0.0;
                let h = |k: u32| Ok(if upper { spherical_h1(order(k), z)? } else { spherical_h2(order(k), z)? });
                let w = j(ell)? * derivative(h, ell, z)? - derivative(j, ell, z)? * h(ell)?;
                let expected = if upper { I / (z * z) } else { -I / (z * z) };
                worst = worst.max((w - expected).norm() / expected.norm());
            }
        }
    }
    Ok(Check::below("wronskian_identity", worst, 1e-9))
}

/// Infimum over `10 ≤ ν ≤ 80` and `s ∈ {4, 6, 8}` of
/// `(1/ν) log(√ν |F_ν(−iνs)|)` for `F = J` and `F = H⁽¹⁾`; must be positive.
pub fn bessel_growth_bound() -> Result<Check, CliError> {
    let mut inf = f64::INFINITY;
    for s in [4.0, 6.0, 8.0] {
        for n in 10..=80u32 {
            let nu = n as f64 + 0.5;
            let z = Complex64::new(0.0, -nu * s);
            for log in [ln_abs_bessel_j(order(n), z)?, ln_abs_hankel_h1(order(n), z)?] {
                inf = inf.min((0.5 * nu.ln() + log) / nu);
            }
        }
    }
    Ok(Check { name: "bessel_growth_bound".into(), passed: inf > 0.0, metric: inf, threshold: 0.0 })
}

pub fn special_function_suite() -> Result<Vec<Check>, CliError> {
    Ok(vec![bessel_modulus_identity()?, hankel_continuation_identity()?, wronskian_identity()?, bessel_growth_bound()?])
}

/// `cos κa − iλ sin(κa)/κ`, `κ² = λ² − c`: the s-wave matching condition in
/// `d = 3`, even in `κ`.
fn s_wave(lambda: Complex64, c: Complex64, a: f64) -> Complex64 {
    let k = (lambda * lambda - c).sqrt();
    let sinc = if (k * a).norm() < 1e-8 { Complex64::new(a, 0.0) } else { (k * a).sin() / k };
    (k * a).cos() - I * lambda * sinc
}

/// Roots of the s-wave condition in a rectangle, from Newton started on a grid.
pub fn s_wave_roots(c: Complex64, a: f64, region: &SearchRegion) -> Vec<Complex64> {
    let (nx, ny) = (160, 60);
    let f = |z| s_wave(z, c, a);
    let mut roots: Vec<Complex64> = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            let mut z = Complex64::new(
                region.re_min + (region.re_max - region.re_min) * i as f64 / nx as f64,
                region.im_min + (region.im_max - region.im_min) * j as f64 / ny as f64,
            );
            for _ in 0..80 {
                let h = 1e-6 * z.norm().max(1.0);
                let step = f(z) / ((f(z + h) - f(z - h)) / (2.0 * h));
                z -= step;
                if !step.norm().is_finite() || step.norm() < 1e-15 * z.norm().max(1.0) {
                    break;
                }
            }
            let scale = 1.0 + z.norm() * a;
            let on = f(z).norm() < 1e-12 * scale;
            let inside = z.re > region.re_min && z.re < region.re_max && z.im > region.im_min && z.im < region.top();
            if on && inside && roots.iter().all(|r| (r - z).norm() > 1e-6) {
                roots.push(z);
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatch {
    pub solver: usize,
    pub oracle: usize,
    /// Largest distance from an oracle root to the nearest solver zero.
    pub max_distance: f64,
}

/// The general mode-0 solver against the closed-form s-wave scan in `d = 3`.
pub fn s_wave_oracle(spec: &PotentialSpec, region: &SearchRegion, tol: f64) -> Result<OracleMatch, CliError> {
    if spec.dim != 3 {
        return Err(CliError::Config("the s-wave oracle is three-dimensional".into()));
    }
    let found = find_mode_resonances(spec, 0, region, tol)?;
    let oracle = s_wave_roots(spec.coupling, spec.radius, region);
    let max_distance = oracle
        .iter()
        .map(|z| found.iter().map(|r| (r.lambda - z).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let solver: usize = found.iter().map(|r| r.multiplicity as usize).sum();
    Ok(OracleMatch { solver, oracle: oracle.len(), max_distance })
}

pub fn oracle_check(spec: &PotentialSpec, region: &SearchRegion, tol: f64) -> Result<Check, CliError> {
    let m = s_wave_oracle(spec, region, tol)?;
    let mut check = Check::below("s_wave_oracle", m.max_distance, 1e-8);
    check.passed &= m.solver == m.oracle && m.oracle > 0;
    Ok(check)
}

/// Minimum relative eigenvalue margin of `big` over `small` on `s ∈ {5, 10}`.
pub fn domination(
    name: &str,
    big: &RadialPotential,
    small: &RadialPotential,
    top_k: usize,
    nodes: Option<usize>,
) -> Result<Check, CliError> {
    let mut worst = f64::INFINITY;
    for s in [5.0, 10.0] {
        let r = domination_check(big, small, s, 1, top_k, nodes)?;
        worst = worst.min(r.min_margin).min(r.det_margin);
    }
    Ok(Check::above(name, worst, -1e-8))
}

/// The two reference pairs: `2χ_B ≥ χ_B` and `χ_B + χ_{B/2} ≥ χ_B`.
pub fn domination_pairs(dim: u32, radius: f64, top_k: usize, nodes: Option<usize>) -> Result<Vec<Check>, CliError> {
    let ball = RadialPotential::ball(dim, radius, 1.0.into())?;
    let double = RadialPotential::ball(dim, radius, 2.0.into())?;
    let nested = RadialPotential::steps(dim, &[(radius, 1.0.into()), (0.5 * radius, 1.0.into())])?;
    Ok(vec![
        domination("domination_scaled", &double, &ball, top_k, nodes)?,
        domination("domination_nested", &nested, &ball, top_k, nodes)?,
    ])
}

pub fn crosscheck(
    spec: &PotentialSpec,
    m: u32,
    region: &SearchRegion,
    tol: f64,
    nodes: Option<usize>,
) -> Result<CrosscheckReport, CliError> {
    let options = CrosscheckOptions { n_nodes: nodes, tol, ..CrosscheckOptions::default() };
    Ok(det_zero_crosscheck(spec, m, region, &options)?)
}

/// Pairing and factorisation lines from one cross-check report.
pub fn crosscheck_checks(r: &CrosscheckReport) -> Vec<Check> {
    let unmatched = r.unmatched_zeros + r.unmatched_resonances;
    let mut pairing = Check::below("zero_pairing", r.max_pair_distance, r.pair_tol);
    pairing.passed &= unmatched == 0 && !r.nystrom_zeros.is_empty();
    vec![pairing, Check::below("det_factorization", r.factorization_error, 1e-8)]
}

/// Fitted decay exponent of `|h(re^{iπ/2}) − 1|` on `r = 4·2^{k/2}`, `k = 0..8`.
pub fn ray_decay(spec: &PotentialSpec, m: u32) -> Result<Check, CliError> {
    let radii: Vec<f64> = (0..9).map(|k| 4.0 * 2f64.powf(k as f64 / 2.0)).collect();
    let r = ray_limit_check(spec, m, FRAC_PI_2, &radii)?;
    Ok(Check::below("ray_decay", r.exponent, -0.8))
}

/// Fitted growth exponent of `|d/dλ log det S(λ)|` over a geometric grid.
pub fn scattering_derivative_exponent(spec: &PotentialSpec, lambdas: &[f64]) -> Result<f64, CliError> {
    let mut x = Vec::with_capacity(lambdas.len());
    let mut y = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let d = sdet_log_derivative(spec, l)?;
        let v = d.value.norm();
        if v > 0.0 {
            x.push(l.ln());
            y.push(v.ln());
        }
    }
    if x.len() < 2 {
        return Err(CliError::Numeric(reslab_core::Error::InsufficientData("derivative vanishes on the grid".into())));
    }
    Ok(fit_line(&x, &y).0)
}

/// Largest `||S_ℓ(λ)| − 1|` over `ℓ ≤ ell_max` and the grid.
pub fn unitarity_defect(spec: &PotentialSpec, lambdas: &[f64], ell_max: u32) -> Result<f64, CliError> {
    let mut worst = 0.0f64;
    for &l in lambdas {
        for ell in 0..=ell_max {
            worst = worst.max((mode_smatrix(spec, ell, l)?.norm() - 1.0).abs());
        }
    }
    Ok(worst)
}

pub fn scattering_checks(spec: &PotentialSpec) -> Result<Vec<Check>, CliError> {
    let lambdas: Vec<f64> = (0..12).map(|k| 5.0 * 12f64.powf(k as f64 / 11.0)).collect();
    let mut out = vec![Check::below(
        "scattering_derivative_exponent",
        scattering_derivative_exponent(spec, &lambdas)?,
        spec.dim as f64 - 2.0 + 0.3,
    )];
    if spec.is_real() {
        out.push(Check::below("unitarity", unitarity_defect(spec, &lambdas, 60)?, 1e-10));
    }
    Ok(out)
}
