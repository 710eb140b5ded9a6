//! End-to-end runs of the `condqed` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUPPRESSION: &str = r#"
[system]
g = 5.1
kappa = 3.7
gamma = 6.0
gamma_prime = 9.1

[effective]
vacuum_rabi = 37.0
g2_zero = 0.236192285

[drive]
n_over_n0 = 0.07

[pulse]
intensity_step = -0.026
guard_ns = 45.0
"#;

fn condqed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condqed")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = condqed(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn steady_text_and_json_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SUPPRESSION);
    let text = run_ok("steady", &cfg, dir.path(), &[]);
    let json: serde_json::Value = serde_json::from_str(&run_ok("steady", &cfg, dir.path(), &["--json"])).unwrap();
    let mut fields = 0;
    for line in text.lines() {
        let (key, value) = line.split_once(" = ").unwrap();
        let v: f64 = value.parse().unwrap();
        assert_eq!(json[key].as_f64().unwrap(), v, "{key}");
        fields += 1;
    }
    assert_eq!(fields, json.as_object().unwrap().len());
    let g2: f64 = json["g2_zero"].as_f64().unwrap();
    assert!(g2 < 1.0);
}

#[test]
fn uncoupled_cavity_is_coherent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "empty.toml",
        "[system]\ng = 0.0\nkappa = 3.7\ngamma = 6.0\nn_atoms = 1.0\n[drive]\nepsilon = 0.5\n",
    );
    let json: serde_json::Value = serde_json::from_str(&run_ok("steady", &cfg, dir.path(), &["--json"])).unwrap();
    assert!((json["g2_zero"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", SUPPRESSION);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok("capture", &cfg, &a, &[]);
    run_ok("capture", &cfg, &b, &[]);
    let fa = fs::read(a.join("capture.csv")).unwrap();
    assert_eq!(fa, fs::read(b.join("capture.csv")).unwrap());
    let text = String::from_utf8(fa).unwrap();
    assert!(text.starts_with("# condqed capture"));
    assert!(text.contains("# [pulse]"));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "tau_ns,g2_feedback,g2_free");
    assert_eq!(rows.len(), 3002);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("capture_solution.json")).unwrap()).unwrap();
    let t = sidecar["capture"]["t_capture_ns"].as_f64().unwrap();
    assert!((49.0..=65.0).contains(&t));
}

#[test]
fn g2_csv_and_json_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", &format!("{SUPPRESSION}[grid]\ntau_max_ns = 10.0\ndt_ns = 0.5\n"));
    run_ok("g2", &cfg, dir.path(), &["--json"]);
    let csv = fs::read_to_string(dir.path().join("g2_free.csv")).unwrap();
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 22);
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g2_free.json")).unwrap()).unwrap();
    let json_rows = doc["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), 21);
    let (tau, g2) = rows[5].split_once(',').unwrap();
    assert_eq!(json_rows[4][0].as_f64().unwrap(), tau.parse::<f64>().unwrap());
    assert_eq!(json_rows[4][1].as_f64().unwrap(), g2.parse::<f64>().unwrap());
}

#[test]
fn sweep_handles_empty_single_and_duplicate_lists() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "e.toml", SUPPRESSION);
    run_ok("sweep", &empty, &dir.path().join("e"), &[]);
    let csv = fs::read_to_string(dir.path().join("e/sweep.csv")).unwrap();
    assert_eq!(data_lines(&csv), vec!["intensity_step,tau_star_ns,response"]);

    let single = write_config(dir.path(), "s.toml", &format!("{SUPPRESSION}[sweep]\nsteps = [-0.026, -0.026]\n"));
    let o = condqed(&[
        "sweep",
        "--config",
        single.to_str().unwrap(),
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate"));
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let rows = data_lines(&csv);
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("-0.026,"));
}

#[test]
fn mc_is_seeded_and_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SUPPRESSION}[mc]\nduration_ns = 800.0\nn_trajectories = 40\ncutoff = 4\nfeedback = true\n\
         [correlator]\ntau_min_ns = -100.0\ntau_max_ns = 100.0\nnormalize = \"independent-rate\"\n"
    );
    let cfg = write_config(dir.path(), "mc.toml", &text);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let report = run_ok("mc", &cfg, &a, &["--seed", "5"]);
    assert!(report.contains("atomic_jumps"));
    run_ok("mc", &cfg, &b, &["--seed", "5"]);
    run_ok("mc", &cfg, &c, &["--seed", "6"]);
    let clicks = |d: &Path| fs::read_to_string(d.join("clicks.csv")).unwrap();
    assert_eq!(clicks(&a), clicks(&b));
    assert_ne!(data_lines(&clicks(&a)), data_lines(&clicks(&c)));
    assert!(clicks(&a).contains("# seed = 5"));
    assert_eq!(data_lines(&clicks(&a))[0], "trajectory_id,detector,time_ns");
    let hist = fs::read_to_string(a.join("histogram.csv")).unwrap();
    assert_eq!(data_lines(&hist).len(), 401);
}

#[test]
fn oracle_reports_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SUPPRESSION}[oracle]\ncutoff = 3\ntau_max_ns = 20.0\ndt_ns = 1.0\n");
    let cfg = write_config(dir.path(), "o.toml", &text);
    let json: serde_json::Value = serde_json::from_str(&run_ok("oracle", &cfg, dir.path(), &["--json"])).unwrap();
    assert!(json["max_abs_deviation"].as_f64().unwrap().is_finite());
    let csv = fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert_eq!(data_lines(&csv)[0], "tau_ns,g2_oracle,g2_model,abs_diff");
}

#[test]
fn config_errors_name_key_or_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &SUPPRESSION.replace("kappa = 3.7", "kappa = \"x\""));
    let o = condqed(&["steady", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.kappa"));

    let missing = dir.path().join("nope.toml");
    let o = condqed(&["steady", "--config", missing.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));

    let both = write_config(dir.path(), "both.toml", &SUPPRESSION.replace("n_over_n0 = 0.07", "n_over_n0 = 0.07\nepsilon = 2.0"));
    let o = condqed(&["steady", "--config", both.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`drive`"));
}
