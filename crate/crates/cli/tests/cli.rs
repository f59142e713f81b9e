use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use reslab_cli::commands::{cmd_resonances, read_resonances};
use reslab_cli::{ResultEnvelope, RunConfig};
use reslab_core::resonance::{find_resonances, PotentialSpec};

fn reslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reslab")).args(args).env_remove("RESLAB_THREADS").output().expect("run reslab")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("reslab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn envelope(out: &Output) -> ResultEnvelope {
    ResultEnvelope::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
}

fn read(path: &Path) -> ResultEnvelope {
    ResultEnvelope::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn free_problem_has_header_and_no_rows() {
    let out = reslab(&["resonances", "--coupling-re", "0", "--rmax", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let env = envelope(&out);
    assert_eq!(env.command, "resonances");
    assert_eq!(env.schema_version, 1);
    assert!(env.rows.is_empty());
    assert_eq!(env.columns, ["ell", "re_lambda", "im_lambda", "multiplicity", "residual"]);
}

#[test]
fn resonance_rows_match_library() {
    let cfg = RunConfig { rmax: 8.0, threads: 1, ..RunConfig::default() };
    let env = cmd_resonances(&cfg).unwrap().envelope;
    let spec = PotentialSpec::new(3, 1.0, Complex64::new(5.0, 0.0)).unwrap();
    let set = find_resonances(&spec, 8.0, 1e-10).unwrap();
    assert_eq!(env.rows.len(), set.items.len());
    let back = read_resonances(&ResultEnvelope::parse(&env.render()).unwrap()).unwrap();
    assert_eq!(back.total_count(), set.total_count());
    for (a, b) in back.items.iter().zip(&set.items) {
        assert_eq!(a.lambda, b.lambda);
        assert_eq!((a.ell, a.multiplicity), (b.ell, b.multiplicity));
    }
}

#[test]
fn count_fit_round_trip() {
    let res = scratch("round_trip.csv");
    let out = reslab(&["resonances", "--rmax", "12", "--out", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = reslab(&["count-fit", res.to_str().unwrap(), "--window", "3:12"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(&out);
    let slope: f64 = env.result_value("slope").unwrap().parse().unwrap();
    assert!(slope > 1.0 && slope < 6.0, "slope {slope}");
    assert_eq!(env.result_value("input.rmax"), Some("12.0"));
    let counts: Vec<u64> = env.rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*counts.last().unwrap(), read(&res).result_value("count").unwrap().parse::<u64>().unwrap());
}

#[test]
fn count_fit_without_zeros_is_insufficient_data() {
    let res = scratch("empty.csv");
    let out = reslab(&["resonances", "--coupling-re", "0", "--rmax", "40", "--out", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let out = reslab(&["count-fit", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn count_fit_recovers_synthetic_order() {
    // s-wave zeros at |λ_k| = √(k + 1/2), so N(r) ≈ r²
    let mut text = String::from(
        "# reslab resonances\n# schema_version = 1\n# config.rmax = 40.0\n# result.complete_below = 40.0\n",
    );
    text.push_str("ell,re_lambda,im_lambda,multiplicity,residual\n");
    let phase = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
    for k in 0..1600 {
        let z = phase * (k as f64 + 0.5).sqrt();
        text.push_str(&format!("0,{:?},{:?},1,0\n", z.re, z.im));
    }
    let path = scratch("synthetic.csv");
    std::fs::write(&path, text).unwrap();
    let out = reslab(&["count-fit", path.to_str().unwrap(), "--window", "10:40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let slope: f64 = envelope(&out).result_value("slope").unwrap().parse().unwrap();
    assert!((1.95..=2.05).contains(&slope), "slope {slope}");
}

#[test]
fn config_file_then_environment_then_flags() {
    let path = scratch("run.conf");
    std::fs::write(&path, "# small run\ncoupling_re = 2.0\nrmax = 6\nthreads = 2\n").unwrap();
    let conf = path.to_str().unwrap();

    let out = reslab(&["resonances", "--config", conf, "--rmax", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let env = envelope(&out);
    assert_eq!(env.config["coupling_re"], "2.0");
    assert_eq!(env.config["rmax"], "5.0");
    assert_eq!(env.config["threads"], "2");

    let out = Command::new(env!("CARGO_BIN_EXE_reslab"))
        .args(["resonances", "--config", conf])
        .env("RESLAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(envelope(&out).config["threads"], "3");

    let out = Command::new(env!("CARGO_BIN_EXE_reslab"))
        .args(["resonances", "--config", conf, "--threads", "1"])
        .env("RESLAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(envelope(&out).config["threads"], "1");
}

#[test]
fn configuration_errors_exit_two() {
    assert_eq!(reslab(&["resonances", "--tol", "3"]).status.code(), Some(2));
    assert_eq!(reslab(&["resonances", "--dim", "2"]).status.code(), Some(2));
    assert_eq!(reslab(&["bs-det", "--s-grid", "4:2"]).status.code(), Some(2));
    let path = scratch("bad.conf");
    std::fs::write(&path, "colour = red\n").unwrap();
    assert_eq!(reslab(&["resonances", "--config", path.to_str().unwrap()]).status.code(), Some(2));
    // the fit window must lie inside the resonance file's complete range
    let res = scratch("short.csv");
    reslab(&["resonances", "--rmax", "6", "--out", res.to_str().unwrap()]);
    assert_eq!(reslab(&["count-fit", res.to_str().unwrap(), "--window", "2:20"]).status.code(), Some(2));
}

#[test]
fn bs_det_rows_on_small_grid() {
    let out = reslab(&["bs-det", "--coupling-re", "1", "--s-grid", "2:4:3", "--m", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(&out);
    assert_eq!(env.rows.len(), 3);
    let status = env.column("status").unwrap();
    let log_det = env.column("log_det").unwrap();
    let drift = env.column("drift").unwrap();
    let mut last = 0.0;
    for row in &env.rows {
        assert_eq!(row[status], "ok");
        let v: f64 = row[log_det].parse().unwrap();
        assert!(v > last);
        last = v;
        assert!(row[drift].parse::<f64>().unwrap() < 1e-5);
    }
    assert!(env.result_value("slope").is_some());
}

#[test]
fn bessel_check_passes() {
    let out = reslab(&["bessel-check"]);
    assert_eq!(out.status.code(), Some(0));
    let env = envelope(&out);
    assert_eq!(env.rows.len(), 4);
    assert!(env.rows.iter().all(|r| r[1] == "pass"));
}

#[test]
fn smatrix_rows_are_unitary() {
    let out = reslab(&["smatrix", "--lambda-grid", "5:20:4"]);
    assert_eq!(out.status.code(), Some(0));
    let env = envelope(&out);
    assert_eq!(env.rows.len(), 4);
    let defect = env.column("unitarity_defect").unwrap();
    assert!(env.rows.iter().all(|r| r[defect].parse::<f64>().unwrap() <= 1e-10));
}

#[test]
fn loose_tolerance_breaks_pairing_not_domination() {
    let out = reslab(&["verify", "--tol", "0.1"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(&out);
    let status = |name: &str| env.rows.iter().find(|r| r[0] == name).map(|r| r[1].clone()).unwrap();
    assert_eq!(status("domination_scaled"), "pass");
    assert_eq!(status("domination_nested"), "pass");
    assert_eq!(status("zero_pairing"), "fail");
    assert_eq!(env.result_value("failed").map(|v| v != "0"), Some(true));
}

#[test]
fn reference_verify_passes() {
    let out = reslab(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let env = envelope(&out);
    assert!(env.rows.iter().all(|r| r[1] == "pass"));
    assert_eq!(env.config["coupling_re"], "5.0");
}
