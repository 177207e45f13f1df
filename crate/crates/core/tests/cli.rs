//! The `hjchar` binary: exit codes, artifact formats and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hjchar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjchar")).args(args).output().expect("binary runs")
}

fn out_flag(dir: &Path) -> String {
    format!("out_dir={}", dir.display())
}

#[test]
fn list_models_prints_catalog() {
    let o = hjchar(&["--list-models"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    for name in ["free", "mechanical", "discounted", "antidiscounted", "osgood"] {
        assert!(s.contains(name));
    }
}

#[test]
fn config_errors_exit_1_and_list_every_issue() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "command=solve\nmodel=unknown\nnx=8\n").unwrap();
    let o = hjchar(&["--config", cfg.to_str().unwrap(), "bogus=1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("3 configuration error(s)"), "{err}");
    assert!(err.contains("line 2 `model`") && err.contains("line 3 `nx`") && err.contains("flag `bogus`"));
}

#[test]
fn solve_writes_one_row_per_cell_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |d: &Path| {
        vec![
            "command=solve".to_string(),
            "model=free".into(),
            "phi=cos:1:1:0".into(),
            "times=0.25,0.5,1.0".into(),
            "nx=32".into(),
            "ny=64".into(),
            "np=65".into(),
            out_flag(d),
        ]
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let v = args(d);
        let o = hjchar(&v.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(a.join("field.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,t,u"));
    assert_eq!(csv.lines().count(), 1 + 32 * 3);
    assert_eq!(fs::read(a.join("field.csv")).unwrap(), fs::read(b.join("field.csv")).unwrap());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    for key in ["model", "phi", "grid", "seeds", "fill_fraction", "fallback_cells", "runtime_ms"] {
        assert!(summary.get(key).is_some(), "{key}");
    }
}

#[test]
fn failed_assertion_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = hjchar(&[
        "command=compare",
        "model=free",
        "phi=cos:1:1:0",
        "times=0.5",
        "nx=32",
        "ny=32",
        "np=33",
        "reference=lf",
        "threshold=1e-12",
        &out_flag(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("error_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["sup"].as_f64().unwrap() > 1e-12);
}

#[test]
fn fundamental_record_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = hjchar(&["command=fundamental", "model=free", "x0=0", "u0=0", "x=0.25", "T=0.5", &out_flag(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fundamental.json")).unwrap()).unwrap();
    assert!((j["value"].as_f64().unwrap() - 0.0625).abs() < 1e-10);
    for key in ["p0", "winding", "residual", "candidates"] {
        assert!(j.get(key).is_some());
    }
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("tau,x,u,p\n"));
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        hjchar::cli::parse_config(&text, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 10);
}
