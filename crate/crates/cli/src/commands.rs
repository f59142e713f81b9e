use std::time::Instant;

use num_complex::Complex64;
use reslab_core::birman::{fredholm_det_checked, DetOptions, RadialPotential};
use reslab_core::growth::{convergence_exponent, counting_function, geometric_grid};
use reslab_core::resonance::{
    find_resonances, sdet_log_derivative, PotentialSpec, Resonance, ResonanceSet, SearchRegion,
};
use reslab_core::specfun::harmonic_multiplicity;
use reslab_core::{Error, Rect};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt_f64, ResultEnvelope};
use crate::suite::{self, Check};

/// A finished command: the file to write and the exit code.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub envelope: ResultEnvelope,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(envelope: ResultEnvelope) -> Self {
        Self { envelope, exit_code: 0 }
    }
}

fn timed(cfg: &RunConfig, f: impl FnOnce(&RunConfig) -> Result<Outcome, CliError>) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = f(cfg)?;
    out.envelope.elapsed_s = start.elapsed().as_secs_f64();
    Ok(out)
}

pub fn cmd_resonances(cfg: &RunConfig) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| {
        let set = find_resonances(&cfg.spec()?, cfg.rmax, cfg.tol)?;
        let mut env =
            ResultEnvelope::new("resonances", cfg, &["ell", "re_lambda", "im_lambda", "multiplicity", "residual"]);
        env.result("complete_below", fmt_f64(set.complete_below));
        env.result("ell_max", set.ell_max);
        env.result("count", set.total_count());
        for r in &set.items {
            env.row(vec![
                r.ell.to_string(),
                fmt_f64(r.lambda.re),
                fmt_f64(r.lambda.im),
                r.multiplicity.to_string(),
                format!("{:.3e}", r.residual),
            ]);
        }
        Ok(Outcome::ok(env))
    })
}

/// Rebuild a resonance set from a `resonances` file.
pub fn read_resonances(env: &ResultEnvelope) -> Result<ResonanceSet, CliError> {
    if env.command != "resonances" {
        return Err(CliError::Config(format!("expected a resonances file, got `{}`", env.command)));
    }
    let cfg = env.run_config()?;
    let spec = cfg.spec()?;
    let parse =
        |v: &str| -> Result<f64, CliError> { v.parse().map_err(|_| CliError::Config(format!("bad number `{v}`"))) };
    let complete_below = parse(env.result_value("complete_below").unwrap_or(&cfg.rmax.to_string()))?;
    let ell_max = env.result_value("ell_max").and_then(|v| v.parse().ok()).unwrap_or(0);
    let [c_ell, c_re, c_im, c_mult] = ["ell", "re_lambda", "im_lambda", "multiplicity"].map(|c| env.column(c));
    let (c_ell, c_re, c_im, c_mult) = (c_ell?, c_re?, c_im?, c_mult?);
    let c_res = env.column("residual").ok();
    let mut items = Vec::with_capacity(env.rows.len());
    for row in &env.rows {
        let ell: u32 = row[c_ell].parse().map_err(|_| CliError::Config(format!("bad mode `{}`", row[c_ell])))?;
        let lambda = Complex64::new(parse(&row[c_re])?, parse(&row[c_im])?);
        items.push(Resonance {
            lambda,
            ell,
            multiplicity: row[c_mult]
                .parse()
                .map_err(|_| CliError::Config(format!("bad multiplicity `{}`", row[c_mult])))?,
            degeneracy: harmonic_multiplicity(spec.dim, ell),
            residual: c_res.map_or(Ok(0.0), |c| parse(&row[c]))?,
            rect: Rect { re_min: lambda.re, re_max: lambda.re, im_min: lambda.im, im_max: lambda.im },
        });
    }
    Ok(ResonanceSet { spec, items, ell_max, region: SearchRegion::for_radius(complete_below), complete_below })
}

pub fn cmd_count_fit(cfg: &RunConfig, input: &ResultEnvelope) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| {
        let set = read_resonances(input)?;
        let (lo, hi) = cfg.window;
        let radii = geometric_grid(lo, hi);
        let table = counting_function(&set, &radii)?;
        let fit = convergence_exponent(&set, cfg.window)?;
        let mut env = ResultEnvelope::new("count-fit", cfg, &["r", "N"]);
        for (k, v) in &input.config {
            env.result(&format!("input.{k}"), v);
        }
        env.result("slope", fmt_f64(fit.slope));
        env.result("intercept", fmt_f64(fit.intercept));
        env.result("rms", fmt_f64(fit.rms_residual));
        env.result("summary", format!("slope={:.6},window={lo}:{hi},rms={:.3e}", fit.slope, fit.rms_residual));
        for (r, n) in table.radii.iter().zip(&table.counts) {
            env.row(vec![fmt_f64(*r), n.to_string()]);
        }
        Ok(Outcome::ok(env))
    })
}

pub fn cmd_bs_det(cfg: &RunConfig) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| {
        let m = cfg.m.unwrap_or(1);
        let pot = RadialPotential::ball(cfg.dim, cfg.radius, cfg.coupling())?;
        let options = DetOptions { n_nodes: cfg.nodes, ..DetOptions::default() };
        let mut env = ResultEnvelope::new("bs-det", cfg, &["s", "log_det", "log_log_det", "nodes", "drift", "status"]);
        let mut fit = (Vec::new(), Vec::new());
        let mut failures = 0;
        let grid = cfg.s_grid.points();
        for &s in &grid {
            match fredholm_det_checked(&pot, Complex64::new(0.0, -s), 2 * m, &options) {
                Ok((det, drift)) => {
                    let log_det = det.log_det.re;
                    let log_log = if log_det > 0.0 { log_det.ln() } else { f64::NAN };
                    if log_log.is_finite() {
                        fit.0.push(s.ln());
                        fit.1.push(log_log);
                    }
                    env.row(vec![
                        fmt_f64(s),
                        fmt_f64(log_det),
                        fmt_f64(log_log),
                        det.n_nodes.to_string(),
                        format!("{drift:.3e}"),
                        "ok".into(),
                    ]);
                }
                // a bad argument fails every row alike
                Err(e @ (Error::InvalidArgument(_) | Error::Precondition(_) | Error::Configuration(_))) => {
                    return Err(e.into())
                }
                Err(e) => {
                    failures += 1;
                    let status = format!("error: {e}").replace(',', ";");
                    env.row(vec![fmt_f64(s), "nan".into(), "nan".into(), "0".into(), "nan".into(), status]);
                }
            }
        }
        if fit.0.len() >= 2 {
            let (slope, _, rms) = reslab_core::growth::fit_line(&fit.0, &fit.1);
            env.result("slope", fmt_f64(slope));
            env.result("rms", fmt_f64(rms));
        }
        let exit_code = if failures == grid.len() { 3 } else { 0 };
        Ok(Outcome { envelope: env, exit_code })
    })
}

pub fn cmd_smatrix(cfg: &RunConfig) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| {
        let spec = cfg.spec()?;
        let mut env = ResultEnvelope::new(
            "smatrix",
            cfg,
            &["lambda", "re_dlogdet", "im_dlogdet", "abs_dlogdet", "truncation_error", "ell_max", "unitarity_defect"],
        );
        let lambdas = cfg.lambda_grid.points();
        let mut fit = (Vec::new(), Vec::new());
        for &l in &lambdas {
            let d = sdet_log_derivative(&spec, l)?;
            let defect = suite::unitarity_defect(&spec, &[l], d.ell_max)?;
            if d.value.norm() > 0.0 {
                fit.0.push(l.ln());
                fit.1.push(d.value.norm().ln());
            }
            env.row(vec![
                fmt_f64(l),
                fmt_f64(d.value.re),
                fmt_f64(d.value.im),
                fmt_f64(d.value.norm()),
                format!("{:.3e}", d.truncation_error),
                d.ell_max.to_string(),
                format!("{defect:.3e}"),
            ]);
        }
        if fit.0.len() >= 2 {
            env.result("growth_exponent", fmt_f64(reslab_core::growth::fit_line(&fit.0, &fit.1).0));
        }
        Ok(Outcome::ok(env))
    })
}

fn report(command: &str, cfg: &RunConfig, checks: &[Check]) -> Outcome {
    let mut env = ResultEnvelope::new(command, cfg, &["check_name", "status", "metric"]);
    for c in checks {
        env.row(vec![c.name.clone(), c.status().into(), format!("{:.6e}", c.metric)]);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    env.result("checks", checks.len());
    env.result("failed", failed);
    Outcome { envelope: env, exit_code: if failed == 0 { 0 } else { 1 } }
}

pub fn cmd_bessel_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| Ok(report("bessel-check", cfg, &suite::special_function_suite()?)))
}

pub fn cmd_crosscheck_zeros(cfg: &RunConfig) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| {
        let m = cfg.m.unwrap_or(2);
        let r = suite::crosscheck(&cfg.spec()?, m, &cfg.search_region()?, cfg.tol, cfg.nodes)?;
        let mut env =
            ResultEnvelope::new("crosscheck-zeros", cfg, &["kind", "ell", "re_lambda", "im_lambda", "multiplicity"]);
        for z in &r.nystrom_zeros {
            env.row(vec![
                "det_zero".into(),
                z.ell.to_string(),
                fmt_f64(z.lambda.re),
                fmt_f64(z.lambda.im),
                z.multiplicity.to_string(),
            ]);
        }
        for z in &r.resonances {
            env.row(vec![
                "resonance".into(),
                z.ell.to_string(),
                fmt_f64(z.lambda.re),
                fmt_f64(z.lambda.im),
                z.multiplicity.to_string(),
            ]);
        }
        env.result("max_pair_distance", format!("{:.3e}", r.max_pair_distance));
        env.result("unmatched_zeros", r.unmatched_zeros);
        env.result("unmatched_resonances", r.unmatched_resonances);
        env.result("factorization_error", format!("{:.3e}", r.factorization_error));
        env.result("ell_max", r.ell_max);
        env.result("nodes", r.n_nodes);
        let passed = suite::crosscheck_checks(&r).iter().all(|c| c.passed);
        Ok(Outcome { envelope: env, exit_code: if passed { 0 } else { 1 } })
    })
}

/// The full invariant suite on the configured potential (defaults: `d = 3`,
/// `a = 1`, `c = 5`).
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    timed(cfg, |cfg| {
        let spec: PotentialSpec = cfg.spec()?;
        let mut checks = suite::special_function_suite()?;
        if spec.dim == 3 {
            let region = SearchRegion::new(0.1, 12.0, -4.0, -0.01)?;
            checks.push(suite::oracle_check(&spec, &region, cfg.tol)?);
        }
        checks.extend(suite::domination_pairs(spec.dim, spec.radius, cfg.top_k, cfg.nodes)?);
        let m = cfg.m.unwrap_or(2);
        let r = suite::crosscheck(&spec, m, &cfg.search_region()?, cfg.tol, cfg.nodes)?;
        checks.extend(suite::crosscheck_checks(&r));
        checks.push(suite::ray_decay(&spec, m)?);
        checks.extend(suite::scattering_checks(&spec)?);
        Ok(report("verify", cfg, &checks))
    })
}
