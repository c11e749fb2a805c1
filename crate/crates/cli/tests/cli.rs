use std::path::{Path, PathBuf};
use std::process::Command;

use cascade_cli::run;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cascade(args: &[&str]) -> Output {
    let mut argv = vec!["cascade"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

const POINT: [&str; 8] = ["--n", "10", "--beta1", "1.98", "--beta2", "1.98", "--d", "0.99"];

fn with_point(head: &[&str], tail: &[&str]) -> Vec<String> {
    head.iter().chain(POINT.iter()).chain(tail).map(|s| s.to_string()).collect()
}

fn cascade_owned(args: &[String]) -> Output {
    cascade(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

#[test]
fn validate_reports_738_nonzeros() {
    let o = cascade_owned(&with_point(&["validate"], &[]));
    assert_eq!(o.code, 0, "{}", o.stderr);
    let report: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["nonzeros"], 738);
    for key in ["row_sums_ok", "signs_ok", "count_ok", "absorbing_ok"] {
        assert_eq!(report[key], true, "{key}");
    }
}

fn parse_mfpt_line(line: &str) -> (f64, f64, bool) {
    let fields: Vec<&str> = line.trim_end().split(' ').collect();
    assert_eq!(fields.len(), 3, "{line}");
    let value = |i: usize, key: &str| fields[i].strip_prefix(key).unwrap_or_else(|| panic!("{line}")).to_string();
    (
        value(0, "mfpt=").parse().unwrap(),
        value(1, "cond=").parse().unwrap(),
        value(2, "gated=").parse().unwrap(),
    )
}

#[test]
fn mfpt_line_and_ssa_cross_check() {
    let passage = ["--from", "LH", "--to", "HH", "--h", "10", "--l", "1"];
    let o = cascade_owned(&with_point(&["mfpt"], &passage));
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(o.stdout.lines().count(), 1);
    let (t, cond, gated) = parse_mfpt_line(&o.stdout);
    assert!(t > 0.0 && t.is_finite());
    assert!(cond < 1e7 && !gated);

    let mut tail = passage.to_vec();
    tail.extend_from_slice(&["--samples", "10000", "--seed", "5"]);
    let s = cascade_owned(&with_point(&["ssa"], &tail));
    assert_eq!(s.code, 0, "{}", s.stderr);
    let report: serde_json::Value = serde_json::from_str(&s.stdout).unwrap();
    let solver = report["solver_mfpt"].as_f64().unwrap();
    assert!((solver - t).abs() <= 1e-9 * t, "{solver} vs {t}");
    assert!(report["z"].as_f64().unwrap().abs() <= 3.0, "{report}");
    assert_eq!(report["censored"], 0);
}

#[test]
fn ssa_output_is_seed_stable() {
    let args = with_point(&["ssa"], &["--from", "HH", "--to", "LH", "--h", "2", "--l", "1", "--samples", "500"]);
    let a = cascade_owned(&args);
    let b = cascade_owned(&args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn emulate_keys_in_fixed_order() {
    let o = cascade_owned(&with_point(&["emulate"], &["--h", "10", "--l", "1"]));
    assert_eq!(o.code, 0, "{}", o.stderr);
    let keys = [
        "r1", "r2", "r3", "r4", "r5", "r6", "r7", "r8", "r", "odds", "p_hh_ll", "p_hh_hh", "mfpt_hh_lh", "mfpt_hh_ll",
        "mfpt_hh_hh",
    ];
    let positions: Vec<usize> = keys
        .iter()
        .map(|k| o.stdout.find(&format!("\"{k}\":")).unwrap_or_else(|| panic!("missing {k}")))
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "{}", o.stdout);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    let (r4, r6) = (v["r4"].as_f64().unwrap(), v["r6"].as_f64().unwrap());
    assert!((v["r"].as_f64().unwrap() - r4 / (r4 + r6)).abs() < 1e-15);
    let total = v["p_hh_ll"].as_f64().unwrap() + v["p_hh_hh"].as_f64().unwrap();
    assert!((total - 1.0).abs() <= f64::EPSILON);
}

#[test]
fn equilibria_prints_three_roots() {
    let o = cascade(&["equilibria", "--beta1", "1.49", "--beta2", "1.49", "--d", "0.99"]);
    assert_eq!(o.code, 0);
    let roots: Vec<f64> = o.stdout.lines().map(|l| l.split(' ').next().unwrap().parse().unwrap()).collect();
    let delta = 0.5f64.sqrt();
    let expected = [0.0, 1.0 - delta, 1.0 + delta];
    assert_eq!(roots.len(), 3);
    for (got, want) in roots.iter().zip(expected) {
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
    }
    assert!(o.stdout.contains("stable") && o.stdout.contains("unstable"));
}

#[test]
fn export_q_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.mtx");
    let path_str = path.to_str().unwrap();
    let o = cascade_owned(&with_point(&["export-q"], &["--out", path_str]));
    assert_eq!(o.code, 0, "{}", o.stderr);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
    assert_eq!(lines.next(), Some("121 121 738"));
    assert_eq!(lines.count(), 738);
    let to_stdout = cascade_owned(&with_point(&["export-q"], &[]));
    assert_eq!(to_stdout.stdout, text);
}

#[test]
fn default_sweep_writes_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run1");
    let prefix = prefix.to_str().unwrap();
    let config = default_config();
    let o = cascade(&["sweep", "--config", config.to_str().unwrap(), "--out", prefix]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let records = std::fs::read_to_string(format!("{prefix}_records.csv")).unwrap();
    let nu = std::fs::read_to_string(format!("{prefix}_nu.csv")).unwrap();
    assert_eq!(records.lines().count(), 1216);
    assert_eq!(nu.lines().count(), 82);
    let report: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert!(report["conventions"]["trap"].is_string());
    assert_eq!(report["records"], 1215);
}

fn small_config(dir: &Path, gate: f64) -> PathBuf {
    let path = dir.join("small.json");
    let body = format!(
        r#"{{"n": 4, "d_values": [0.5], "beta_offsets": [0.01, 0.99], "eta_values": [0.5, 0.9], "cond_gate": {gate}}}"#
    );
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn sweep_output_is_byte_stable_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 1e7);
    let mut outputs = Vec::new();
    for (jobs, name) in [("1", "a"), ("3", "b")] {
        let prefix = dir.path().join(name);
        let prefix = prefix.to_str().unwrap().to_string();
        let o = cascade(&["sweep", "--config", config.to_str().unwrap(), "--out", &prefix, "--jobs", jobs]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        outputs.push((
            std::fs::read(format!("{prefix}_records.csv")).unwrap(),
            std::fs::read(format!("{prefix}_nu.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    // n = 4 has 6 threshold pairs; 4 beta cells
    assert_eq!(String::from_utf8_lossy(&outputs[0].0).lines().count(), 1 + 4 * 6);
    assert_eq!(String::from_utf8_lossy(&outputs[0].1).lines().count(), 1 + 4 * 2);
}

#[test]
fn strict_gate_exits_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 10.0);
    let prefix = dir.path().join("g");
    let args = ["sweep", "--config", config.to_str().unwrap(), "--out", prefix.to_str().unwrap()];
    let lenient = cascade(&args);
    assert_eq!(lenient.code, 0);
    assert!(lenient.stderr.contains("warning:"));
    let mut strict = args.to_vec();
    strict.push("--strict");
    let o = cascade(&strict);
    assert_eq!(o.code, 2);
    assert_single_error_line(&o.stderr);
}

fn assert_single_error_line(stderr: &str) {
    let errors: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(errors.len(), 1, "{stderr}");
}

#[test]
fn validation_failures_exit_one() {
    let cases: Vec<Vec<String>> = vec![
        with_point(&["mfpt"], &["--from", "LH", "--to", "LH", "--h", "10", "--l", "1"]),
        with_point(&["mfpt"], &["--from", "LH", "--to", "HH", "--h", "11", "--l", "1"]),
        with_point(&["mfpt"], &["--from", "LH", "--to", "HH", "--h", "3", "--l", "3"]),
        with_point(&["mfpt"], &["--from", "XY", "--to", "HH", "--h", "3", "--l", "1"]),
        with_point(&["ssa"], &["--from", "LH", "--to", "HH", "--h", "3", "--l", "1", "--cap", "-1"]),
        vec!["mfpt".into(), "--beta1".into(), "-1".into(), "--beta2".into(), "1".into(), "--d".into(), "1".into()],
        vec!["validate".into(), "--beta1".into(), "-1".into(), "--beta2".into(), "1".into(), "--d".into(), "1".into()],
        vec!["bogus".into()],
        with_point(&["validate"], &["--frobnicate"]),
        vec!["sweep".into(), "--jobs".into(), "0".into()],
    ];
    for args in cases {
        let o = cascade_owned(&args);
        assert_eq!(o.code, 1, "{args:?}: {}", o.stderr);
        assert_single_error_line(&o.stderr);
        assert!(o.stdout.is_empty(), "{args:?} wrote to stdout");
    }
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n": 10, "colour": "blue"}"#).unwrap();
    let o = cascade(&["sweep", "--config", path.to_str().unwrap(), "--out", "unused"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.starts_with("error:"), "{}", o.stderr);
    let missing = cascade(&["sweep", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.code, 1);
    assert_single_error_line(&missing.stderr);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cascade");
    let ok = Command::new(bin).args(with_point(&["validate"], &[])).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let usage = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(usage.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&usage.stderr).starts_with("error:"));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("sweep"));
}
