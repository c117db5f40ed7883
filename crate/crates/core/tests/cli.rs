use std::path::Path;
use std::process::Command;

use heston_rv::cli::config::{preset, ExperimentConfig};
use heston_rv::cli::run_study;
use heston_rv::realized::JRule;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_heston-rv"));
    for var in ["HESTON_RV_CONFIG", "HESTON_RV_PRESET", "HESTON_RV_OUT", "HESTON_RV_SEED", "HESTON_RV_JOBS", "HESTON_RV_FORMAT"] {
        c.env_remove(var);
    }
    c
}

fn small_lq() -> ExperimentConfig {
    let mut cfg = preset("desk-default").unwrap();
    cfg.sim.dt = 5e-5;
    cfg.grids.eps = vec![0.1, 0.05];
    cfg.grids.beta = vec![0.0];
    cfg.grids.j_rules = vec![JRule::Inverse, JRule::Constant(40)];
    cfg.lq.n_blocks = 2;
    cfg.lq.block_size = 25;
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn analytic_check_confirms_feller_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["analytic-check", "--out"]).arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["summary"]["feller_ratio"], 3.4);
    assert_eq!(manifest["summary"]["all_pass"], true);
    assert_eq!(manifest["study"], "analytic-check");
    let csv = std::fs::read_to_string(out.join("analytic_check.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn empty_eps_grid_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_lq();
    cfg.grids.eps.clear();
    let path = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let res = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&res.stderr).unwrap();
    assert_eq!(report["error"], "config_error");
    assert!(!out.exists());
}

#[test]
fn misaligned_grid_and_bad_usage_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_lq();
    cfg.sim.dt = 3e-5;
    let path = write_config(dir.path(), &cfg);
    let res = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let res = bin().args(["run", "--bogus-flag"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let res = bin().args(["run"]).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn environment_overrides_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_lq());
    let out = dir.path().join("env-out");
    let res = bin()
        .args(["run"])
        .env("HESTON_RV_CONFIG", &path)
        .env("HESTON_RV_OUT", &out)
        .env("HESTON_RV_SEED", "77")
        .env("HESTON_RV_FORMAT", "csv")
        .env("HESTON_RV_JOBS", "1")
        .output()
        .unwrap();
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 77);
    assert_eq!(manifest["config"]["sim"]["seed"], 77);
    assert!(out.join("lq_convergence.csv").exists());
    assert!(!out.join("lq_convergence.json").exists());
}

#[test]
fn presets_print_as_loadable_toml() {
    let res = bin().args(["print-presets", "paper-9.2"]).output().unwrap();
    assert!(res.status.success());
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(res.stdout).unwrap()).unwrap();
    assert_eq!(cfg, preset("paper-9.2").unwrap());
    assert_eq!(cfg.lq.n_blocks, 200);
    assert_eq!(cfg.lq.block_size, 1000);
}

#[test]
fn cached_paths_reproduce_the_uncached_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut plain = small_lq();
    plain.output.dir = dir.path().join("plain");
    let mut cached = plain.clone();
    cached.sim.cache = Some(dir.path().join("cache"));
    cached.output.dir = dir.path().join("cached");
    run_study(&plain, plain.study, None).unwrap();
    run_study(&cached, cached.study, None).unwrap();
    let entries = std::fs::read_dir(dir.path().join("cache")).unwrap().count();
    assert_eq!(entries, 2, "one dump per block");
    cached.output.dir = dir.path().join("cached-again");
    run_study(&cached, cached.study, None).unwrap();
    let read = |d: &str| std::fs::read(dir.path().join(d).join("lq_convergence.csv")).unwrap();
    assert_eq!(read("plain"), read("cached"));
    assert_eq!(read("plain"), read("cached-again"));
}

#[test]
fn snapshot_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("snapshot").unwrap();
    cfg.sim.dt = 1e-5;
    cfg.grids.j_rules = vec![JRule::Constant(10), JRule::Constant(40)];
    cfg.snapshot.horizon = 0.2;
    let path = write_config(dir.path(), &cfg);
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("s{k}"));
        let res = bin().args(["snapshot", "--config"]).arg(&path).arg("--out").arg(&out).output().unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        bytes.push(std::fs::read(out.join("snapshot.csv")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    let text = String::from_utf8(bytes[0].clone()).unwrap();
    assert!(text.starts_with("beta,eps,j_rule,j,t,V,Y\n0,0.01,const:10,10,0.01,"));
}
