use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cradle_cli::ChainDocument;

fn cradle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cradle")).args(args).output().expect("binary runs")
}

fn cradle_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cradle")).args(args).env(key, val).output().expect("binary runs")
}

fn design(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["design", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = cradle(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn read(path: &Path) -> ChainDocument {
    ChainDocument::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn free_free_design_has_five_mirrored_masses() {
    let dir = tempfile::tempdir().unwrap();
    let doc = read(&design(dir.path(), "ff.json", &["--N", "4", "--r", "2"]));
    assert_eq!(doc.masses.len(), 5);
    assert_eq!(doc.springs.len(), 4);
    for i in 0..5 {
        assert!((doc.masses[i] - doc.masses[4 - i]).abs() < 1e-12 * doc.masses[i]);
    }
    assert_eq!(doc.derived.kseq, vec![0, 1, 4, 15, 56]);
}

#[test]
fn design_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--N", "7", "--r", "3", "--k0", "2", "--k1", "3", "--boundary", "fixed-fixed"];
    let a = std::fs::read(design(dir.path(), "a.json", &args)).unwrap();
    let b = std::fs::read(design(dir.path(), "b.json", &args)).unwrap();
    assert_eq!(a, b);
    let doc = ChainDocument::from_json(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(doc.to_json().as_bytes(), &a[..]);
}

#[test]
fn deformed_end_mass_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["--N", "3", "--r", "2", "--k0", "1", "--k1", "2", "--boundary", "fixed-fixed"];
    let plain = read(&design(dir.path(), "p.json", &base));
    let mut args = base.to_vec();
    args.extend_from_slice(&["--alpha", "0.25"]);
    let deformed = read(&design(dir.path(), "d.json", &args));
    let want = 0.25 / 0.75 * plain.masses[3];
    assert!((deformed.masses[3] / deformed.masses[0] - want / plain.masses[0]).abs() < 1e-12);
}

#[test]
fn parity_violation_exits_with_validation_code() {
    let out = cradle(&["design", "--N", "4", "--r", "2", "--k0", "1", "--k1", "3", "--boundary", "fixed-fixed"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_PARITY"));
}

#[test]
fn interior_surgery_and_bad_alpha_rejected() {
    let out = cradle(&["design", "--N", "6", "--r", "2", "--surgery", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_INTERIOR_SURGERY"));
    let out = cradle(&["design", "--N", "6", "--r", "2", "--alpha", "1.2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_ALPHA_RANGE"));
}

#[test]
fn size_cap_follows_environment() {
    let out = cradle_env(&["design", "--N", "12", "--r", "2"], "CRADLE_MAX_N", "10");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap 10"));
    let out = cradle_env(&["design", "--N", "12", "--r", "2"], "CRADLE_MAX_N", "12");
    assert!(out.status.success());
}

#[test]
fn missing_file_is_io_error() {
    let out = cradle(&["verify", "/nonexistent/chain.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn auto_simulation_rows_and_transfer() {
    let dir = tempfile::tempdir().unwrap();
    let spec = design(dir.path(), "c.json", &["--N", "5", "--r", "2", "--k0", "1", "--k1", "2", "--boundary", "fixed-fixed"]);
    let out = cradle(&["simulate", spec.to_str().unwrap()]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header.len(), 1 + 6 + 6 + 1);
    assert_eq!(header[0], "t");
    assert_eq!(header[13], "E");

    let sched = cradle(&["schedule", spec.to_str().unwrap()]);
    let sched: serde_json::Value = serde_json::from_slice(&sched.stdout).unwrap();
    let events: usize = sched["entries"].as_array().unwrap().iter().map(|e| e["events"].as_array().unwrap().len()).sum();
    assert_eq!(rows.len(), 200 + events);

    let first = &rows[0];
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() < 1e-15);
    assert!(first[2..7].iter().all(|p| p.abs() < 1e-15));
    let last = rows.last().unwrap();
    assert!((last[0] - std::f64::consts::PI).abs() < 1e-12);
    assert!((last[6].abs() - 1.0).abs() < 1e-8);
    let e0 = first[13];
    assert!(rows.iter().all(|r| (r[13] - e0).abs() < 1e-10 * e0));
}

#[test]
fn explicit_times() {
    let dir = tempfile::tempdir().unwrap();
    let spec = design(dir.path(), "c.json", &["--N", "3", "--r", "2"]);
    let out = cradle(&["simulate", spec.to_str().unwrap(), "--times", "0,0.5,1"]);
    let (_, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    let out = cradle(&["simulate", spec.to_str().unwrap(), "--times", "soon"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn schedules() {
    let dir = tempfile::tempdir().unwrap();
    let ff = design(dir.path(), "ff.json", &["--N", "4", "--r", "2"]);
    let out = cradle(&["schedule", ff.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0]["z"], 2);
    let ev = &entries[0]["events"][0];
    assert!((ev["p0"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    assert!((ev["pn"].as_f64().unwrap() - 0.5).abs() < 1e-15);

    let fx = design(dir.path(), "fx.json", &["--N", "4", "--r", "2", "--k0", "1", "--k1", "2", "--boundary", "fixed-fixed"]);
    let out = cradle(&["schedule", fx.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let zs: Vec<u64> = v["entries"].as_array().unwrap().iter().map(|e| e["z"].as_u64().unwrap()).collect();
    assert_eq!(zs, vec![2, 3, 4]);
    assert!(v["entries"].as_array().unwrap().iter().all(|e| !e["conditions"].as_array().unwrap().is_empty()));

    let out = cradle(&["schedule", fx.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("Z,l,tau,p0,pN,conditions"));
    assert_eq!(text.lines().count(), 1 + 1 + 2 + 3);
}

#[test]
fn verify_pass_fail_and_no_pst_note() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--N", "5", "--r", "2", "--k0", "1", "--k1", "2", "--boundary", "fixed-fixed"];
    let good = design(dir.path(), "g.json", &args);
    let out = cradle(&["verify", good.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("RESULT PASS"));

    let mut doc = read(&good);
    doc.masses[1] *= 1.01;
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, doc.to_json()).unwrap();
    let out = cradle(&["verify", bad.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pst = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "perfect_transfer").unwrap();
    assert_eq!(pst["passed"], false);

    let mut args = args.to_vec();
    args.extend_from_slice(&["--alpha", "0.3"]);
    let deformed = design(dir.path(), "d.json", &args);
    let out = cradle(&["verify", deformed.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("no PST"));
    assert!(text.contains("PASS fractional_revival"));
}

#[test]
fn surgered_design_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let spec = design(dir.path(), "s.json", &["--N", "6", "--r", "2", "--surgery", "5,6"]);
    let doc = read(&spec);
    assert_eq!(doc.design.surgery, vec![[5, 6]]);
    assert_eq!(doc.derived.kseq, vec![0, 1, 4, 15, 56]);
    let out = cradle(&["verify", spec.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
