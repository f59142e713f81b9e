use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reslab_cli::commands::{
    cmd_bessel_check, cmd_bs_det, cmd_count_fit, cmd_crosscheck_zeros, cmd_resonances, cmd_smatrix, cmd_verify,
};
use reslab_cli::config::{parse_grid, parse_window};
use reslab_cli::{with_threads, CliError, Outcome, ResultEnvelope, RunConfig};

#[derive(Parser)]
#[command(name = "reslab", version, about = "Resonances of radial potentials: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resonances with |λ| < rmax, one row per zero
    Resonances(Common),
    /// Counting function and growth-order fit from a resonances file
    CountFit {
        /// File written by `reslab resonances`
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// log det(I + B(−is)^{2m}) on a geometric s-grid, with node drift
    BsDet(Common),
    /// d/dλ log det S(λ) on a geometric λ-grid, with unitarity defects
    Smatrix(Common),
    /// Special-function identity suite
    BesselCheck(Common),
    /// Pair zeros of det(I − (−1)^m B^m) with resonances of rotated couplings
    CrosscheckZeros(Common),
    /// Run every invariant check
    Verify(Common),
}

#[derive(Args, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<u32>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    coupling_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    coupling_im: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    m: Option<u32>,
    /// lo:hi:n
    #[arg(long)]
    s_grid: Option<String>,
    /// lo:hi:n
    #[arg(long)]
    lambda_grid: Option<String>,
    /// lo:hi
    #[arg(long)]
    window: Option<String>,
    /// re_min:re_max:im_min:im_max
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply_env()?;
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.radius {
            cfg.radius = v;
        }
        if let Some(v) = self.coupling_re {
            cfg.coupling_re = v;
        }
        if let Some(v) = self.coupling_im {
            cfg.coupling_im = v;
        }
        if let Some(v) = self.rmax {
            cfg.rmax = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if self.nodes.is_some() {
            cfg.nodes = self.nodes;
        }
        if self.m.is_some() {
            cfg.m = self.m;
        }
        if let Some(v) = &self.s_grid {
            cfg.s_grid = parse_grid("s_grid", v)?;
        }
        if let Some(v) = &self.lambda_grid {
            cfg.lambda_grid = parse_grid("lambda_grid", v)?;
        }
        if let Some(v) = &self.window {
            cfg.window = parse_window("window", v)?;
        }
        if let Some(v) = &self.region {
            cfg.set("region", v)?;
        }
        if let Some(v) = self.top_k {
            cfg.top_k = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(Outcome, RunConfig), CliError> {
    let (common, input) = match &cli.command {
        Command::CountFit { input, common } => (common, Some(input)),
        Command::Resonances(c)
        | Command::BsDet(c)
        | Command::Smatrix(c)
        | Command::BesselCheck(c)
        | Command::CrosscheckZeros(c)
        | Command::Verify(c) => (c, None),
    };
    let cfg = common.resolve()?;
    let input = match input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(ResultEnvelope::parse(&text)?)
        }
        None => None,
    };
    let outcome = with_threads(cfg.threads, || match &cli.command {
        Command::Resonances(_) => cmd_resonances(&cfg),
        Command::CountFit { .. } => cmd_count_fit(&cfg, input.as_ref().expect("input parsed above")),
        Command::BsDet(_) => cmd_bs_det(&cfg),
        Command::Smatrix(_) => cmd_smatrix(&cfg),
        Command::BesselCheck(_) => cmd_bessel_check(&cfg),
        Command::CrosscheckZeros(_) => cmd_crosscheck_zeros(&cfg),
        Command::Verify(_) => cmd_verify(&cfg),
    })??;
    Ok((outcome, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (outcome, cfg) = match run(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("reslab: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let text = outcome.envelope.render();
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("reslab: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    for (k, v) in &outcome.envelope.results {
        if k == "summary" {
            eprintln!("{v}");
        }
    }
    if outcome.envelope.columns.first().map(String::as_str) == Some("check_name") {
        for row in &outcome.envelope.rows {
            eprintln!("{:<32} {:<5} {}", row[0], row[1], row[2]);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
