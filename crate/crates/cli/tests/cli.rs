use std::path::Path;
use std::process::{Command, Output};

const LLN: &str = r#"
kind = "lln"
seed = 5
replicas = 200
horizon = 20.0

[environment]
kind = "independent_refresh"
r = 1.0
nu_p = 0.5
L = 16
d = 1

[walker]
jumps = [{ z = [1], base = 1.0 }]
"#;

fn run(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rwde")).arg("--config").arg(&path).arg("--out").arg(dir.join("out")).args(extra).output().unwrap()
}

#[test]
fn poisson_lln_passes_with_json_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(LLN, tmp.path(), &["--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/lln_summary.json")).unwrap()).unwrap();
    let a = &s["assertions"][0];
    assert_eq!(a["name"], "v_hat[0]");
    assert_eq!(a["pass"], true);
    assert!((a["lhs"].as_f64().unwrap() - 1.0).abs() < 0.1);
    assert_eq!(s["metadata"]["seed"], 5);
    assert_eq!(s["metadata"]["threads"], 1);
    assert!(s["metadata"]["git_describe"].is_string());
    assert!(tmp.path().join("out/lln_speed.csv").exists());
}

#[test]
fn failed_assertion_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&format!("{LLN}\n[options]\nexpected_speed = [3.0]\n"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn missing_walker_is_a_config_error_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = LLN.replace("[walker]\njumps = [{ z = [1], base = 1.0 }]\n", "");
    let o = run(&cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`walker`"));
}

#[test]
fn unknown_kind_and_bad_grid_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&LLN.replace("\"lln\"", "\"sweep\""), tmp.path(), &[]).status.code(), Some(2));
    let grid = LLN.replace("kind = \"lln\"", "kind = \"coupling_decay\"") + "\n[grids]\nt = [0.0, 2.0, 1.0]\n";
    assert_eq!(run(&grid, tmp.path(), &[]).status.code(), Some(2));
    assert_eq!(run(&LLN.replace("horizon = 20.0", "horizon = 20.0\nhorizn = 1.0"), tmp.path(), &[]).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let path = tmp.path().join("config.toml");
    std::fs::write(&path, LLN).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_rwde")).arg("--config").arg(&path).arg("--out").arg(blocker.join("sub")).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn overrides_and_format() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(LLN, tmp.path(), &["--seed", "9", "--replicas", "50", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/lln_summary.json")).unwrap()).unwrap();
    assert_eq!((s["metadata"]["seed"].as_u64(), s["metadata"]["replicas"].as_u64()), (Some(9), Some(50)));
    assert!(!tmp.path().join("out/lln_speed.csv").exists());
}

#[test]
fn appendix_suite_passes_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("kind = \"appendix_suite\"\nseed = 1\n", tmp.path(), &["--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let qv = std::fs::read_to_string(tmp.path().join("out/appendix_suite_qv.csv")).unwrap();
    assert!(qv.starts_with("T,expected_qv,variance,closed_form\n0.25,"));
}
