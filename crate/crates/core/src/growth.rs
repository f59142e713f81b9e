//! Counting functions, growth-order fits and genus-`p` canonical factors.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::resonance::ResonanceSet;

/// Ratio of consecutive radii in every fit grid.
pub const GRID_RATIO: f64 = 1.189_207_115_002_721; // 2^{1/4}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingTable {
    pub radii: Vec<f64>,
    /// Multiplicity-weighted number of resonances with `|λ| < r`.
    pub counts: Vec<u64>,
    pub complete_below: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub rms_residual: f64,
    pub n_points: usize,
}

/// Least-squares line through `(x, y)`: `(slope, intercept, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// `lo, lo·2^{1/4}, …` up to and including `hi` (within rounding).
pub fn geometric_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let r = lo * 2f64.powf(k as f64 / 4.0);
        if r > hi * (1.0 + 1e-12) {
            break;
        }
        out.push(r);
        k += 1;
    }
    out
}

/// Weighted counts `#{|λ| < r}` of `(modulus, weight)` pairs.
fn count_below(points: &[(f64, u64)], radii: &[f64]) -> Vec<u64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0u64;
    for p in &sorted {
        acc += p.1;
        cumulative.push(acc);
    }
    radii
        .iter()
        .map(|&r| {
            let k = sorted.partition_point(|p| p.0 < r);
            if k == 0 {
                0
            } else {
                cumulative[k - 1]
            }
        })
        .collect()
}

fn moduli(set: &ResonanceSet) -> Vec<(f64, u64)> {
    set.items.iter().map(|r| (r.lambda.norm(), r.weight())).collect()
}

pub fn counting_function(set: &ResonanceSet, radii: &[f64]) -> Result<CountingTable> {
    for &r in radii {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be nonnegative, got {r}")));
        }
        if r > set.complete_below {
            return Err(Error::Completeness { radius: r, complete_below: set.complete_below });
        }
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be increasing".into()));
    }
    Ok(CountingTable {
        radii: radii.to_vec(),
        counts: count_below(&moduli(set), radii),
        complete_below: set.complete_below,
    })
}

/// Slope of `log N(r)` against `log r` on the geometric grid over `window`.
pub fn convergence_exponent(set: &ResonanceSet, window: (f64, f64)) -> Result<OrderFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("bad window [{lo}, {hi}]")));
    }
    let radii = geometric_grid(lo, hi);
    let table = counting_function(set, &radii)?;
    let (x, y): (Vec<f64>, Vec<f64>) =
        table.radii.iter().zip(&table.counts).filter(|(_, &n)| n > 0).map(|(r, &n)| (r.ln(), (n as f64).ln())).unzip();
    if x.len() < 4 {
        return Err(Error::InsufficientData(format!("{} radii with nonzero counts in [{lo}, {hi}], need 4", x.len())));
    }
    let (slope, intercept, rms_residual) = fit_line(&x, &y);
    Ok(OrderFit { slope, intercept, window, rms_residual, n_points: x.len() })
}

/// Slope of `log log M(r)` against `log r`. Samples with `log M ≤ 0` are dropped.
pub fn order_fit(samples: &[(f64, f64)]) -> Result<OrderFit> {
    if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("radii must be increasing".into()));
    }
    let kept: Vec<(f64, f64)> =
        samples.iter().filter(|(r, v)| *r > 0.0 && *v > 0.0 && v.is_finite()).copied().collect();
    if kept.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable samples, need 4", kept.len())));
    }
    if kept.iter().all(|s| s.1 == kept[0].1) {
        return Err(Error::InsufficientData("log-modulus does not vary".into()));
    }
    let x: Vec<f64> = kept.iter().map(|s| s.0.ln()).collect();
    let y: Vec<f64> = kept.iter().map(|s| s.1.ln()).collect();
    let (slope, intercept, rms_residual) = fit_line(&x, &y);
    Ok(OrderFit { slope, intercept, window: (kept[0].0, kept[kept.len() - 1].0), rms_residual, n_points: kept.len() })
}

/// `E(u; p) = (1 − u) exp(u + u²/2 + … + u^p/p)`.
pub fn canonical_factor(u: Complex64, p: u32) -> Complex64 {
    (Complex64::new(1.0, 0.0) - u) * exponent_sum(u, p).exp()
}

fn exponent_sum(u: Complex64, p: u32) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::default();
    for k in 1..=p {
        term *= u;
        sum += term / k as f64;
    }
    sum
}

/// `log E(u; p)`; for `|u| < 1` this is `−Σ_{k>p} u^k/k`, summed directly when
/// `|u|` is small to avoid cancellation.
pub fn log_canonical_factor(u: Complex64, p: u32) -> Complex64 {
    if u.norm() < 0.5 {
        let mut term = u.powu(p);
        let mut sum = Complex64::default();
        for k in (p + 1)..(p + 200) {
            term *= u;
            let t = term / k as f64;
            sum -= t;
            if t.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        sum
    } else {
        (Complex64::new(1.0, 0.0) - u).ln() + exponent_sum(u, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalProduct {
    /// `∏ E(λ/λ_j; p)^{w_j}` over the certified set.
    pub value: Complex64,
    /// `Σ w_j log E(λ/λ_j; p)`, argument not unwrapped.
    pub log_value: Complex64,
    /// Estimated `|Σ log E|` over the first omitted doubling shell
    /// `complete_below ≤ |λ_j| < 2·complete_below`, from `|log E(u)| ≤ 2|u|^{p+1}`
    /// and a power-law extrapolation of the counting function.
    pub tail_bound: f64,
    /// `λ` coincides with a listed zero.
    pub exact_zero: bool,
}

pub fn canonical_product(set: &ResonanceSet, p: u32, lambda: Complex64) -> Result<CanonicalProduct> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda is not finite: {lambda}")));
    }
    let mut log_value = Complex64::default();
    for r in &set.items {
        if r.lambda == lambda {
            return Ok(CanonicalProduct {
                value: Complex64::default(),
                log_value: Complex64::new(f64::NEG_INFINITY, 0.0),
                tail_bound: 0.0,
                exact_zero: true,
            });
        }
        log_value += log_canonical_factor(lambda / r.lambda, p) * r.weight() as f64;
    }
    Ok(CanonicalProduct {
        value: log_value.exp(),
        log_value,
        tail_bound: shell_tail(set, p, lambda.norm()),
        exact_zero: false,
    })
}

fn shell_tail(set: &ResonanceSet, p: u32, modulus: f64) -> f64 {
    let big_r = set.complete_below;
    if set.items.is_empty() || !big_r.is_finite() {
        return 0.0;
    }
    let pts = moduli(set);
    let [half, full] = count_below(&pts, &[0.5 * big_r, big_r])[..] else { unreachable!() };
    if full == 0 {
        return 0.0;
    }
    let rho = if half > 0 && full > half { ((full as f64) / (half as f64)).log2() } else { 1.0 };
    // N(r) ≈ N(R)(r/R)^ρ on [R, 2R]; ∫ r^{−p−1} dN
    let q = p as f64 + 1.0;
    let density = full as f64 * rho / big_r.powf(rho);
    let integral = if (rho - q).abs() < 1e-12 {
        density * std::f64::consts::LN_2
    } else {
        density * ((2.0 * big_r).powf(rho - q) - big_r.powf(rho - q)) / (rho - q)
    };
    2.0 * modulus.powf(q) * integral
}
