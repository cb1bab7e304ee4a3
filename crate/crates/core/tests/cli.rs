use std::path::Path;
use std::process::Command;

fn run(dir: &Path, config: &str, args: &[&str]) -> (Option<i32>, std::path::PathBuf) {
    let conf = dir.join("config.json");
    std::fs::write(&conf, config).unwrap();
    let out = dir.join("out");
    let st = Command::new(env!("CARGO_BIN_EXE_dimlab"))
        .args(args)
        .arg("--config")
        .arg(&conf)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (st.status.code(), out)
}

#[test]
fn config_errors_exit_two_without_output() {
    for doc in [
        r#"{"schema_version": 1, "tau": [0.0, -1.0]}"#,
        r#"{"schema_version": 1, "extra": true}"#,
        r#"{"schema_version": 3}"#,
        "not json",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let (code, out) = run(dir.path(), doc, &["verify"]);
        assert_eq!(code, Some(2), "{doc}");
        assert!(!out.exists());
    }
}

#[test]
fn curvature_passes_and_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(dir.path(), r#"{"schema_version": 1, "grids": [32], "d": 2}"#, &["curvature", "--format", "csv"]);
    assert_eq!(code, Some(0));
    let csv = std::fs::read_to_string(out.join("curvature.csv")).unwrap();
    // rank 2: four entries
    assert_eq!(csv.lines().count(), 5);
    assert!(out.join("checks.csv").exists() && out.join("timings.json").exists());
    assert!(!out.join("report.json").exists());
}

#[test]
fn empty_direct_image_is_a_verdict_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(dir.path(), r#"{"schema_version": 1, "grids": [16], "p": 0}"#, &["curvature"]);
    assert_eq!(code, Some(0));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(r["curvature"][0]["empty"].as_str().unwrap().contains("(0,1)"));
}

#[test]
fn tight_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(
        dir.path(),
        r#"{"schema_version": 1, "grids": [16], "tolerances": {"curvature": 1e-12}}"#,
        &["curvature"],
    );
    assert_eq!(code, Some(1));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["pass"], false);
    assert_eq!(r["config"]["tolerances"]["curvature"], 1e-12);
}
