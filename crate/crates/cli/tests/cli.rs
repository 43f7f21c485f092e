use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fehlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fehlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

const FLAT: &str = r#"
[chart]
kind = "torus"
dim = 2
resolution = 16
"#;

#[test]
fn flat_curvature_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", &format!("{FLAT}\n[output]\nfields_dir = \"{}\"\n", dir.path().join("fields").display()));
    let out = fehlab(&["curvature", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["report_version"], 1);
    for f in r["fields"].as_array().unwrap() {
        assert!(f["max_abs"].as_f64().unwrap() <= 1e-12, "{f}");
    }
    let bin = fs::read(dir.path().join("fields/scalar.bin")).unwrap();
    assert_eq!(bin.len(), 4 * 4 + 8 * 16 * 16);
    assert!(dir.path().join("fields/ricci.csv").exists());
}

#[test]
fn warped_curvature_reports_the_edge_scalar_curvature() {
    let out = fehlab(&["curvature", "--config", configs().join("warped.toml").to_str().unwrap(), "--resolution", "128"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let values = r["values"].as_array().unwrap();
    assert_eq!(values[1]["value"].as_f64().unwrap(), -240.0);
    assert!((values[0]["value"].as_f64().unwrap() + 240.0).abs() < 1.0);
    let scalar = &r["fields"][2];
    assert!((scalar["min"].as_f64().unwrap() + 240.0).abs() < 1.0);
}

#[test]
fn malformed_config_is_a_config_error_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &format!("{FLAT}\nunknown_key = 3\n"));
    let out = fehlab(&["curvature", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line") && err.contains("unknown_key"), "{err}");

    let cfg = write_config(dir.path(), "syntax.toml", "[chart\nkind = 1\n");
    assert_eq!(fehlab(&["curvature", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(fehlab(&["curvature", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn large_amplitude_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{FLAT}\n[metric]\nkind = \"conformal_perturbed\"\namplitude = 0.7\nwavenumbers = 1\nseed = 0\n");
    let cfg = write_config(dir.path(), "amp.toml", &text);
    assert_eq!(fehlab(&["curvature", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_passes_on_a_perturbed_torus_and_fails_when_too_strict() {
    let cfg = configs().join("verify_torus.toml");
    let out = fehlab(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    assert_eq!(r["summary"]["fail"], 0);
    assert!(r["summary"]["pass"].as_u64().unwrap() >= 4);

    let out = fehlab(&["verify", "--config", cfg.to_str().unwrap(), "--tolerance-scale", "1e-12"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn second_variation_on_a_non_critical_base_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[chart]
kind = "torus"
dim = 2
resolution = 32

[metric]
kind = "conformal_perturbed"
amplitude = 0.1
wavenumbers = 1
seed = 1

[f]
kind = "power"
beta = 2
"#;
    let cfg = write_config(dir.path(), "sv.toml", text);
    let out = fehlab(&["second-variation", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["summary"]["skipped"], 3);
    assert!(r["entries"].as_array().unwrap().iter().all(|e| e["status"] == "skipped:hypothesis"));
}

#[test]
fn second_variation_on_the_flat_torus() {
    let out = fehlab(&["second-variation", "--config", configs().join("second_variation_flat.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    assert_eq!(r["summary"]["skipped"], 0);
    assert_eq!(r["values"][0]["name"], "lambda");
    assert_eq!(r["values"][0]["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn first_variation_of_the_metric_direction_is_half_n_volume() {
    let out = fehlab(&["first-variation", "--config", configs().join("first_variation_flat.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let v = r["values"].as_array().unwrap();
    let along_g = v[0]["value"].as_f64().unwrap();
    let reference = v[1]["value"].as_f64().unwrap();
    assert!((along_g - reference).abs() < 1e-12 && (reference - 1.0).abs() < 1e-12);
}

#[test]
fn warped_example_table() {
    let out = fehlab(&["warped-example", "--config", configs().join("warped.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    let table = r["warped_table"].as_array().unwrap();
    assert_eq!(table.len(), 5);
    assert_eq!(table[0]["status"], "rejected");
    assert!(table[0]["reason"].as_str().unwrap().contains("excluded"));
    assert_eq!(table[1]["alpha"].as_f64().unwrap(), -6.0);
    assert_eq!(table[1]["mu_at_r_min"].as_f64().unwrap(), 43200.0);
    assert!(table[1..].iter().all(|row| row["status"] == "pass"));
}

#[test]
fn reports_are_byte_stable_apart_from_timing() {
    let cfg = configs().join("first_variation_flat.toml");
    let strip = |out: Output| {
        let mut v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    let a = strip(fehlab(&["first-variation", "--config", cfg.to_str().unwrap(), "--seed", "5"]));
    let b = strip(fehlab(&["first-variation", "--config", cfg.to_str().unwrap(), "--seed", "5"]));
    assert_eq!(a, b);
    assert!(a.contains("\"seed\":5"));
}

#[test]
fn csv_output_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let cfg = configs().join("first_variation_flat.toml");
    let out = fehlab(&["first-variation", "--config", cfg.to_str().unwrap(), "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "section,name,direction,value,tolerance,order,min_order,status,note");
    assert!(text.lines().any(|l| l.starts_with("first_variation,")));
    assert!(text.lines().any(|l| l.starts_with("value,")));
}

#[test]
fn unwritable_output_exits_with_code_3() {
    let cfg = configs().join("first_variation_flat.toml");
    let out = fehlab(&["first-variation", "--config", cfg.to_str().unwrap(), "--out", "/nonexistent/dir/report.json"]);
    assert_eq!(out.status.code(), Some(3));
}
