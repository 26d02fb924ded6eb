use std::path::Path;
use std::process::{Command, Output};

use coilopt::interface::ErrorBody;

fn coilopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coilopt")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

#[test]
fn fit_rtd_recovers_the_fixture() {
    let fit = stdout_json(&coilopt(&["fit-rtd", &fixture("tanks_n10.csv")]));
    let n = fit["n_star"].as_f64().unwrap();
    assert!((n - 10.0).abs() < 0.1, "{n}");
    assert!(fit["mse"].as_f64().unwrap() < 1e-3);
}

#[test]
fn nominal_geometry_exports_stl() {
    let dir = tempfile::tempdir().unwrap();
    let stl = dir.path().join("nominal.stl");
    let report = stdout_json(&coilopt(&["geometry", "--validate", "--out", stl.to_str().unwrap()]));
    // two triangles per quad: 48 around, 64 rings per turn over 2 turns plus 3 port segments
    assert_eq!(report["triangles"], 2 * 48 * (64 * 2 + 3));
    assert_eq!(report["watertight"], true);
    assert_eq!(report["self_intersections"], 0);
    let bytes = std::fs::read(&stl).unwrap();
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    assert_eq!(count, 12576);
    assert_eq!(bytes.len(), 84 + 50 * count);
}

#[test]
fn doe_is_reproducible() {
    let args = ["doe", "--space", "coil-path", "--n", "12", "--seed", "4"];
    let a = coilopt(&args);
    assert_eq!(a.stdout, coilopt(&args).stdout);
    let doc = stdout_json(&a);
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 12);
    for p in points {
        let z = p["z"].as_array().unwrap();
        assert!(z.iter().all(|v| (1.0..=4.0).contains(&v.as_f64().unwrap())));
    }
}

#[test]
fn exit_codes() {
    assert_eq!(coilopt(&["--help"]).status.code(), Some(0));
    assert_eq!(coilopt(&[]).status.code(), Some(1));
    assert_eq!(coilopt(&["doe", "--n", "many"]).status.code(), Some(1));
    assert_eq!(coilopt(&["doe", "--space", "coil-path", "--n", "1"]).status.code(), Some(1));

    let out = coilopt(&["fit-rtd", "/nonexistent/trace.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let body: ErrorBody = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(body.error, "io");

    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    std::fs::write(&flat, "t,c\n0,0\n1,0\n2,0\n3,0\n4,0\n5,0\n6,0\n7,0\n").unwrap();
    let out = coilopt(&["fit-rtd", flat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let body: ErrorBody = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(body.error, "invalid-input");
}

#[test]
fn resumed_run_matches_an_uninterrupted_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    let common = ["run", "--space", "coil-path", "--budget", "40", "--seed", "2"];

    let full = stdout_json(&coilopt(&[&common[..], &["--checkpoint", &path("full.json"), "--trace", &path("full.csv")]].concat()));
    assert_eq!(full["status"], "complete");

    let part = coilopt(&[&common[..], &["--checkpoint", &path("part.json"), "--max-evaluations", "5"]].concat());
    assert!(part.status.success());
    assert_ne!(std::fs::read(path("part.json")).unwrap(), std::fs::read(path("full.json")).unwrap());
    let resumed = stdout_json(&coilopt(&["resume", "--checkpoint", &path("part.json"), "--trace", &path("part.csv")]));
    assert_eq!(resumed, full);
    assert_eq!(std::fs::read(path("part.json")).unwrap(), std::fs::read(path("full.json")).unwrap());
    assert_eq!(std::fs::read(path("part.csv")).unwrap(), std::fs::read(path("full.csv")).unwrap());

    let analysis = stdout_json(&coilopt(&["analyze", "--checkpoint", &path("full.json"), "--out", &path("analysis")]));
    for file in analysis["files"].as_array().unwrap() {
        assert!(dir.path().join("analysis").join(file.as_str().unwrap()).is_file());
    }
}
