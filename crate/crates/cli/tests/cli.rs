use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unimetric"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV table as column -> value maps.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn adhm_alpha_two_row() {
    let o = run(&["metric", "--family", "adhm", "--alpha", "2", "--rho", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with(&format!("# unimetric {}\n# config {{", env!("CARGO_PKG_VERSION"))));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    let g_aa = num(&rows[0], "g_aa");
    assert!((g_aa - 256.0 * PI * PI / 5.0).abs() / g_aa < 1e-3);
    assert!(num(&rows[0], "rel_err_A") < 1e-3);
    assert!((num(&rows[0], "measured_exponent") + 2.0).abs() < 1e-3);
}

#[test]
fn alpha_below_half_is_divergent() {
    let o = run(&["metric", "--family", "adhm", "--alpha", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("> 1/2"), "{}", stderr(&o));
}

#[test]
fn sweep_has_twelve_accurate_rows() {
    let o = run(&["metric", "--alpha", "1,1.5,2,3", "--rho", "0.5,1,2", "--tol", "1e-3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let alpha = num(r, "alpha");
        let rho = num(r, "rho");
        // A(alpha) rho^(2 - 2 alpha), Gamma values written out.
        let a = if alpha == 1.0 {
            64.0 * PI * PI / 6.0
        } else if alpha == 1.5 {
            128.0 * PI * PI / 6.0
        } else if alpha == 2.0 {
            256.0 * PI * PI / 5.0
        } else {
            4f64.powi(7) * PI * PI * 5.0 * 24.0 / 5040.0
        };
        let want = a * rho.powf(2.0 - 2.0 * alpha);
        assert!((num(r, "g_aa") - want).abs() / want < 1e-3, "{r:?}");
        assert!(num(r, "rel_err_A") < 1e-3 && num(r, "rel_err_B") < 1e-3);
        let b = num(r, "g_rhorho") / num(r, "g_aa");
        assert!((b - 2.0 / (2.0 * alpha - 1.0)).abs() < 1e-3);
    }
}

#[test]
fn json_output_embeds_config_and_version() {
    let o = run(&["metric", "--alpha", "2", "--format", "json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["command"], "metric");
    assert_eq!(v["config"]["quad"], "radial");
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    assert!(v["rows"][0]["rel_err_B"].as_f64().unwrap() < 1e-3);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for (p, threads) in paths.iter().zip(["1", "2"]) {
        let o = bin()
            .env("UM_THREADS", threads)
            .args(["metric", "--alpha", "2", "--quad", "mc", "--nodes", "20000", "--seed", "7", "--out"])
            .arg(p)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = bin().env("UM_THREADS", "many").args(["metric", "--alpha", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_errors_exit_three() {
    assert_eq!(run(&["metric", "--family", "abelian", "--alpha", "2"]).status.code(), Some(3));
    assert_eq!(run(&["metric", "--alpha", "2", "--center", "1,2"]).status.code(), Some(3));
    assert_eq!(run(&["metric", "--alpha", "2", "--L", "3"]).status.code(), Some(3));
    assert_eq!(run(&["verify", "no-such-suite"]).status.code(), Some(3));
}

#[test]
fn rigid_gauge_table() {
    let o = run(&["metric", "--family", "rigid-gauge", "--beta", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 36);
    let want = 0.5 * 128.0 * PI * PI / 3.0;
    for r in rows.iter().filter(|r| r["label_i"].starts_with('s') && r["label_j"].starts_with('s')) {
        let expected = if r["label_i"] == r["label_j"] { want } else { 0.0 };
        assert!((num(r, "value") - expected).abs() < 1e-3 * want, "{r:?}");
    }
}

#[test]
fn verify_suites() {
    let o = run(&["verify", "nr-isotropy"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS nr-isotropy"));
    let o = run(&["verify", "stacking"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify", "all", "--eta", "anti-self-dual"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL adhm-connection: self-duality defect"), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("FAIL")).all(|l| l.contains("adhm-connection")));
}

#[test]
fn verify_json_report() {
    let o = run(&["verify", "frames", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r["passed"] == "true"));
}

fn reconstruct(input: &Path, recipe: &str) -> (Output, Value) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frame.json");
    let o = bin()
        .args(["reconstruct", "--recipe", recipe, "--out"])
        .arg(&out)
        .arg(input)
        .output()
        .unwrap();
    let v = fs::read_to_string(&out).map(|t| serde_json::from_str(&t).unwrap()).unwrap_or(Value::Null);
    (o, v)
}

fn write_grid(dir: &Path, name: &str, fill: f64) -> PathBuf {
    let row = vec![0.0; 7];
    let mut plane = vec![row.clone(); 7];
    plane[3][3] = fill;
    let v = serde_json::json!({
        "dim": 2,
        "grid": {"min": [-1.0, -1.0], "max": [1.0, 1.0], "points": [7, 7]},
        "components": [plane, vec![row; 7]],
    });
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn reconstruct_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let (o, v) = reconstruct(&write_grid(dir.path(), "zero.json", 0.0), "abelian");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(v["summary"]["max_error"].as_f64(), Some(0.0));
    assert_eq!(v["config"]["command"], "reconstruct");
}

#[test]
fn reconstruct_bundled_samples() {
    for name in ["abelian_d2.json", "abelian_d3.json"] {
        let (o, v) = reconstruct(&data(name), "abelian");
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let order = v["summary"]["order"].as_f64().unwrap();
        assert!((1.8..=2.2).contains(&order), "{name}: {order}");
        assert!(stdout(&o).contains("convergence order"));
        assert!(v["summary"]["unitarity_defect"].as_f64().unwrap() < 1e-14);
    }
}

#[test]
fn reconstruct_nr_recipe() {
    let (o, v) = reconstruct(&data("abelian_d2.json"), "nr");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(v["summary"]["max_error"].as_f64().unwrap() < 1e-5);
    assert!(v["summary"]["unitarity_defect"].as_f64().unwrap() < 1e-12);
    // m = 2d + 1 rows for n = 1.
    assert_eq!(v["components"].as_array().unwrap().len(), 5);
}

#[test]
fn reconstruct_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = reconstruct(&write_grid(dir.path(), "edge.json", 0.0).with_file_name("missing.json"), "abelian");
    assert_eq!(o.status.code(), Some(3));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"dim": 2, "grid": {"min": [0], "max": [1], "points": [5]}, "components": []}"#).unwrap();
    assert_eq!(reconstruct(&bad, "abelian").0.status.code(), Some(3));
    // Nonzero value on the margin (corner of the 7x7 grid).
    let p = dir.path().join("margin.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(write_grid(dir.path(), "m.json", 0.1)).unwrap()).unwrap();
    v["components"][0][0][0] = 0.5.into();
    fs::write(&p, v.to_string()).unwrap();
    let (o, _) = reconstruct(&p, "abelian");
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bundled_samples_match_generator() {
    for (dim, name) in [("2", "abelian_d2.json"), ("3", "abelian_d3.json")] {
        let o = run(&["sample", "--dim", dim]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(o.stdout, fs::read(data(name)).unwrap(), "{name} is stale");
    }
}
