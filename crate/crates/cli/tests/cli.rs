use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_roughflow"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).arg("--out").arg(dir).output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_FBM: &str = "N = 64\nn_paths = 50\n";

#[test]
fn permanent_defaults_pass() {
    let dir = scratch("permanent");
    let out = run(&["permanent"], &dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(&dir.join("permanent_report.json"));
    assert_eq!(rep["subcommand"], "permanent");
    assert!(dir.join("permanent_p6.csv").exists());
    assert!(dir.join("permanent_envelope.json").exists());
}

#[test]
fn gamma_above_hurst_is_a_usage_error() {
    let dir = scratch("bad_gamma");
    let cfg = config(&dir, "H = 0.25\ngamma = 0.3\n");
    let out = bin().args(["lift", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma < H"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = scratch("bad_key");
    let cfg = config(&dir, "hurst = 0.2\n");
    let out = bin().args(["lift", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let a = scratch("seed_a");
    let b = scratch("seed_b");
    let ca = config(&a, SMALL_FBM);
    let cb = config(&b, SMALL_FBM);
    for (dir, cfg) in [(&a, &ca), (&b, &cb)] {
        let out = bin().args(["sample-fbm", "--seed", "7", "--config"]).arg(cfg).arg("--out").arg(dir).output().unwrap();
        assert_ne!(out.status.code(), Some(2));
    }
    assert_eq!(std::fs::read(a.join("fbm.csv")).unwrap(), std::fs::read(b.join("fbm.csv")).unwrap());
    let c = scratch("seed_c");
    let cc = config(&c, SMALL_FBM);
    assert_ne!(bin().args(["sample-fbm", "--seed", "8", "--config"]).arg(&cc).arg("--out").arg(&c).status().unwrap().code(), Some(2));
    assert_ne!(std::fs::read(a.join("fbm.csv")).unwrap(), std::fs::read(c.join("fbm.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_output() {
    let mut files = Vec::new();
    for t in ["1", "2"] {
        let dir = scratch(&format!("threads_{t}"));
        let cfg = config(&dir, SMALL_FBM);
        let out = bin().args(["sample-fbm", "--threads", t, "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
        assert_ne!(out.status.code(), Some(2));
        files.push(std::fs::read(dir.join("fbm.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn reports_match_the_schema() {
    let schema: serde_json::Value = serde_json::from_str(include_str!("../schema/run_report.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let dir = scratch("schema");
    let cfg = config(&dir, SMALL_FBM);
    for sub in ["lift", "flow", "inverse", "permanent"] {
        let out = bin().args([sub, "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
        let rep = json(&dir.join(format!("{sub}_report.json")));
        let errors: Vec<String> = validator.iter_errors(&rep).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{sub}: {errors:?}");
    }
}

#[test]
fn json_flag_prints_the_report() {
    let dir = scratch("json_flag");
    let out = run(&["permanent", "--json"], &dir);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn empty_sweep_exits_cleanly() {
    let dir = scratch("empty_sweep");
    let out = run(&["sweep", "lift"], &dir);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.join("sweep.json"))["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn sweep_of_unknown_subcommand_is_a_usage_error() {
    let dir = scratch("bad_sweep");
    let cfg = config(&dir, "[sweep]\nN = [64]\n");
    let out = bin().args(["sweep", "nonsense", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn weak_residual_sweep_over_steps_decreases() {
    let dir = scratch("weak_sweep");
    let cfg = config(&dir, "weak_paths = 16\n[sweep]\nN = [256, 512, 1024]\n");
    let out = bin().args(["sweep", "weak-residual", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rep = json(&dir.join("sweep.json"));
    let rows = rep["rows"].as_array().unwrap();
    let col: Vec<f64> = rows.iter().map(|r| r["metrics"]["residual_mean"].as_f64().unwrap()).collect();
    assert_eq!(col.len(), 3);
    assert!(col.windows(2).all(|w| w[1] < w[0]), "{col:?}");
    assert!(dir.join("N=256").join("weak_residual.json").exists());
}

#[test]
fn ibp_sweep_over_cutoff() {
    let dir = scratch("ibp_sweep");
    let cfg = config(&dir, "N = 1024\nn_paths = 40\n[sweep]\nK = [50.0, 100.0, 200.0]\n");
    let out = bin().args(["sweep", "ibp", "--config"]).arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = json(&dir.join("sweep.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["metrics"]["mean_relative_gap"].as_f64().unwrap() <= 0.05));
}
