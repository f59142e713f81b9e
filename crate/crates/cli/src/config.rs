//! Run configuration: built-in defaults, then a `key = value` file, then the
//! `RESLAB_THREADS` environment variable, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use reslab_core::resonance::{PotentialSpec, SearchRegion};

use crate::error::CliError;
use crate::output::fmt_f64;

pub const THREADS_ENV: &str = "RESLAB_THREADS";

/// `lo:hi:n`, geometric between positive endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let ratio = (self.hi / self.lo).ln() / (self.n - 1) as f64;
        (0..self.n).map(|k| if k + 1 == self.n { self.hi } else { self.lo * (ratio * k as f64).exp() }).collect()
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", fmt_f64(self.lo), fmt_f64(self.hi), self.n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: u32,
    pub radius: f64,
    pub coupling_re: f64,
    pub coupling_im: f64,
    pub rmax: f64,
    pub tol: f64,
    /// Nyström nodes; `None` picks from `|λ|a`.
    pub nodes: Option<usize>,
    /// Power parameter; `None` means the command default (1 for `bs-det`,
    /// 2 for `crosscheck-zeros`).
    pub m: Option<u32>,
    pub s_grid: Grid,
    pub lambda_grid: Grid,
    pub window: (f64, f64),
    /// `re_min:re_max:im_min:im_max` for the zero cross-check.
    pub region: [f64; 4],
    pub top_k: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            radius: 1.0,
            coupling_re: 5.0,
            coupling_im: 0.0,
            rmax: 12.0,
            tol: 1e-10,
            nodes: None,
            m: None,
            s_grid: Grid { lo: 8.0, hi: 30.0, n: 12 },
            lambda_grid: Grid { lo: 5.0, hi: 60.0, n: 12 },
            window: (10.0, 40.0),
            region: [0.5, 8.0, -3.0, -0.05],
            top_k: 20,
            threads: default_threads(),
            out: None,
        }
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad(key, value, "not a number"))
}

fn parts(key: &str, value: &str, n: usize) -> Result<Vec<f64>, CliError> {
    let v: Vec<&str> = value.split(':').collect();
    if v.len() != n {
        return Err(bad(key, value, &format!("expected {n} colon-separated values")));
    }
    v.iter().map(|p| num(key, p)).collect()
}

pub fn parse_grid(key: &str, value: &str) -> Result<Grid, CliError> {
    let v: Vec<&str> = value.split(':').collect();
    if v.len() != 3 {
        return Err(bad(key, value, "expected lo:hi:n"));
    }
    Ok(Grid { lo: num(key, v[0])?, hi: num(key, v[1])?, n: num(key, v[2])? })
}

pub fn parse_window(key: &str, value: &str) -> Result<(f64, f64), CliError> {
    let v = parts(key, value, 2)?;
    Ok((v[0], v[1]))
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "dim" => self.dim = num(key, value)?,
            "radius" => self.radius = num(key, value)?,
            "coupling_re" => self.coupling_re = num(key, value)?,
            "coupling_im" => self.coupling_im = num(key, value)?,
            "rmax" => self.rmax = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "nodes" => self.nodes = if value == "auto" { None } else { Some(num(key, value)?) },
            "m" => self.m = if value == "auto" { None } else { Some(num(key, value)?) },
            "s_grid" => self.s_grid = parse_grid(key, value)?,
            "lambda_grid" => self.lambda_grid = parse_grid(key, value)?,
            "window" => self.window = parse_window(key, value)?,
            "region" => {
                let v = parts(key, value, 4)?;
                self.region = [v[0], v[1], v[2], v[3]];
            }
            "top_k" => self.top_k = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected `key = value`", no + 1)));
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_file(&text)?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(v) = std::env::var(THREADS_ENV) {
            self.set("threads", &v)?;
        }
        Ok(())
    }

    pub fn coupling(&self) -> Complex64 {
        Complex64::new(self.coupling_re, self.coupling_im)
    }

    pub fn spec(&self) -> Result<PotentialSpec, CliError> {
        Ok(PotentialSpec::new(self.dim, self.radius, self.coupling())?)
    }

    pub fn search_region(&self) -> Result<SearchRegion, CliError> {
        let [a, b, c, d] = self.region;
        Ok(SearchRegion::new(a, b, c, d)?)
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        self.spec()?;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(key, &v.to_string(), "must be positive"))
            }
        };
        positive("rmax", self.rmax)?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(bad("tol", &self.tol.to_string(), "must lie in (0, 1)"));
        }
        for (key, g) in [("s_grid", self.s_grid), ("lambda_grid", self.lambda_grid)] {
            positive(key, g.lo)?;
            if !(g.hi >= g.lo && g.hi.is_finite()) || g.n == 0 || (g.n > 1 && g.hi == g.lo) {
                return Err(bad(key, &g.to_string(), "need 0 < lo < hi and n >= 1"));
            }
        }
        if !(self.window.0 > 0.0 && self.window.1 > self.window.0) {
            return Err(bad("window", &format!("{}:{}", self.window.0, self.window.1), "need 0 < lo < hi"));
        }
        if let Some(n) = self.nodes {
            if n < reslab_core::birman::MIN_NODES {
                return Err(bad("nodes", &n.to_string(), "too few nodes"));
            }
        }
        if self.threads == 0 {
            return Err(bad("threads", "0", "need at least one thread"));
        }
        if self.top_k == 0 {
            return Err(bad("top_k", "0", "must be positive"));
        }
        self.search_region()?;
        Ok(())
    }

    /// Every key with its effective value, in a fixed order.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let [a, b, c, d] = self.region;
        BTreeMap::from([
            ("dim", self.dim.to_string()),
            ("radius", fmt_f64(self.radius)),
            ("coupling_re", fmt_f64(self.coupling_re)),
            ("coupling_im", fmt_f64(self.coupling_im)),
            ("rmax", fmt_f64(self.rmax)),
            ("tol", fmt_f64(self.tol)),
            ("nodes", opt(self.nodes.map(|n| n.to_string()))),
            ("m", opt(self.m.map(|n| n.to_string()))),
            ("s_grid", self.s_grid.to_string()),
            ("lambda_grid", self.lambda_grid.to_string()),
            ("window", format!("{}:{}", fmt_f64(self.window.0), fmt_f64(self.window.1))),
            ("region", [a, b, c, d].map(fmt_f64).join(":")),
            ("top_k", self.top_k.to_string()),
            ("threads", self.threads.to_string()),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("# reference run\ndim = 5\ncoupling_re = -2.5 # attractive\n\ns_grid = 1:4:3\n").unwrap();
        assert_eq!(cfg.dim, 5);
        assert_eq!(cfg.coupling_re, -2.5);
        assert_eq!(cfg.s_grid.points(), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.apply_file("colour = red"), Err(CliError::Config(_))));
        assert!(matches!(cfg.set("rmax", "ten"), Err(CliError::Config(_))));
        assert!(matches!(cfg.set("window", "1:2:3"), Err(CliError::Config(_))));
        cfg.set("tol", "2").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("nodes", "96").unwrap();
        cfg.set("region", "-1:1:-2:-0.1").unwrap();
        let mut again = RunConfig::default();
        for (k, v) in cfg.echo() {
            again.set(k, &v).unwrap();
        }
        assert_eq!(again, cfg);
    }
}
