use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoslab")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL_ZERO_KERNEL: &str = r#"
schema_version = 1
[model]
kernel = "zero"
sigma = "const_iso(s=1)"
nu = "const_nu(v=1)"
initial = "gauss_init(mean=0, var=1)"
[time]
horizon = 0.2
steps = 20
[study]
particles = [32, 64, 128]
replicates = 3
master_seed = 5
checkpoints = 5
[grid]
lo = -8.0
hi = 8.0
cells = 128
[density]
method = "kde"
bandwidth = 0.2
"#;

#[test]
fn validate_accepts_a_builtin_preset() {
    let out = run(&["validate", "--preset", "const_iso"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_and_unknown_preset_are_usage_errors() {
    assert_eq!(code(&run(&["validate", "--no-such-flag"])), 64);
    assert_eq!(code(&run(&["validate", "--preset", "no_such_preset"])), 64);
}

#[test]
fn unknown_config_key_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, format!("{SMALL_ZERO_KERNEL}\n[extra]\nkey = 1\n")).unwrap();
    assert_eq!(code(&run(&["validate", "--config", path.to_str().unwrap()])), 1);
}

#[test]
fn rate_on_an_inverse_law_prints_slope_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    let body: String = [64, 128, 256, 512, 1024].iter().map(|n| format!("{n},{}\n", 3.0 / *n as f64)).collect();
    fs::write(&path, format!("n,value\n{body}")).unwrap();
    let out = run(&["rate", "--input", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).lines().any(|l| l == "slope -1.00"));
}

#[test]
fn study_writes_rows_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(&cfg, SMALL_ZERO_KERNEL).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["study", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["rows.csv", "summary.json", "manifest.json"] {
        assert!(Path::new(&out_dir).join(file).exists(), "{file}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["fit"]["slope"].as_f64().unwrap().is_finite());
    let rows = fs::read_to_string(out_dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 9);
}

#[test]
fn entropy_of_a_field_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let body: String = (0..64)
        .map(|i| {
            let x = -4.0 + (i as f64 + 0.5) * 0.125;
            format!("{x},{}\n", (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect();
    fs::write(&path, format!("x,value\n{body}")).unwrap();
    let p = path.to_str().unwrap();
    let out = run(&["entropy", "--f", p, "--g", p]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["relative_entropy"].as_f64().unwrap(), 0.0);
    assert_eq!(v["l1_distance"].as_f64().unwrap(), 0.0);
}
