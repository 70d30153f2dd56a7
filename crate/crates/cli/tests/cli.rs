use std::path::Path;
use std::process::{Command, Output};

fn dpsco(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpsco"))
        .args(args)
        .env("DPSCO_OUTPUT_DIR", out_dir)
        .output()
        .expect("spawn dpsco")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

#[test]
fn calibrate_direct_values() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(
        &["calibrate", "--n", "10000", "--eps", "0.005", "--delta", "1e-6", "--L", "1", "--D", "1", "--d", "10"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(close(v["sigma"].as_f64().unwrap(), 59.471, 1e-4));
    assert!(close(v["eta"].as_f64().unwrap(), 5.289e-5, 1e-3));
}

#[test]
fn calibrate_from_target() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(&["calibrate", "--eps-bar", "0.1", "--delta-bar", "3e-6", "--n", "400"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(close(v["inputs"]["epsilon"].as_f64().unwrap(), 0.003_363_1, 1e-4));
    assert_eq!(v["mode"], "target");
}

#[test]
fn calibrate_regime_and_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(&["calibrate", "--n", "10000", "--eps", "0.5", "--delta", "1e-6"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
    let o = dpsco(&["calibrate", "--n", "100", "--eps", "0.01"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(&["run", "--seed", "1", "-p", "n_values=16", "-p", "dimension=2", "-p", "set.radius=-1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("radius"));
}

#[test]
fn run_is_reproducible_under_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "run", "--seed", "5", "--name", "smoke", "--repeats", "4", "--dump-traces",
        "-p", "n_values=16,32", "-p", "dimension=2", "-p", "eval_samples=2000", "-p", "baseline_steps=10000",
    ];
    let a = dpsco(&args, tmp.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let dir = tmp.path().join("smoke");
    let cells = std::fs::read(dir.join("cells.csv")).unwrap();
    let trace = std::fs::read(dir.join("trace_cell0.csv")).unwrap();
    assert!(dir.join("summary.json").exists());
    let b = dpsco(&args, tmp.path());
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(cells, std::fs::read(dir.join("cells.csv")).unwrap());
    assert_eq!(trace, std::fs::read(dir.join("trace_cell0.csv")).unwrap());
    let first = String::from_utf8(cells).unwrap();
    assert!(first.lines().next().unwrap().starts_with("# "));
    assert!(first.contains("\"seed\":5"));
}

#[test]
fn run_without_seed_records_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(
        &["run", "--name", "s", "--repeats", "2", "-p", "n_values=16", "-p", "dimension=2", "-p", "eval_samples=500", "-p", "baseline_steps=10000"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let seed = json(&o)["seed"].as_u64().unwrap();
    let text = std::fs::read_to_string(tmp.path().join("s/cells.csv")).unwrap();
    assert!(text.contains(&format!("\"seed\":{seed}")));
}

#[test]
fn tau_sim_writes_per_n_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(&["tau-sim", "--seed", "3", "--n", "16,64", "--trials", "1000"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    for n in [16, 64] {
        let csv = std::fs::read_to_string(tmp.path().join(format!("tau-sim/n{n}/tau.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1000 + 2);
    }
    let o = dpsco(&["tau-sim", "--seed", "3", "--n", "16", "--trials", "10"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn audit_detects_undersized_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dpsco(
        &["audit", "--seed", "9", "--sigma-scale", "0.1", "--trials", "100000", "--grid", "50"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(json(&o)["significant"], true);
    let csv = std::fs::read_to_string(tmp.path().join("audit/audit.csv")).unwrap();
    assert!(csv.contains("interval_lo,interval_hi,p_S,p_Sprime,violation"));
}
