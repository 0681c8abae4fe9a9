use std::path::PathBuf;
use std::process::{Command, Output};

fn tetracomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tetracomm")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn construct_writes_thirty_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    let out = tetracomm(&["steiner", "construct", "--q", "3", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("steiner 10 4 3"));
    assert_eq!(text.lines().skip(1).filter(|l| !l.trim().is_empty()).count(), 30);

    let out = tetracomm(&["steiner", "verify", path.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn verify_fixture_and_reject_broken_file() {
    assert!(tetracomm(&["steiner", "verify", &fixture("steiner_8_4_3.txt")]).status.success());

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    let mut text = std::fs::read_to_string(fixture("steiner_8_4_3.txt")).unwrap();
    text = text.replacen("1 2 3 4", "1 2 3 5", 1);
    std::fs::write(&bad, text).unwrap();
    let out = tetracomm(&["steiner", "verify", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
}

#[test]
fn non_prime_power_is_a_usage_error() {
    assert_eq!(tetracomm(&["steiner", "construct", "--q", "6"]).status.code(), Some(2));
    assert_eq!(tetracomm(&["simulate", "--n", "30"]).status.code(), Some(2));
    assert_eq!(tetracomm(&["partition", "--q", "2", "--design", "x", "--n", "30"]).status.code(), Some(2));
}

#[test]
fn fixtures_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("steiner_8_4_3.txt"), dir.path().join("a.txt")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tetracomm"))
        .args(["steiner", "fixtures"])
        .env("TETRACOMM_FIXTURES", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.contains("a.txt"));
}

#[test]
fn partition_documents() {
    let out = tetracomm(&["partition", "--q", "3", "--n", "120"]);
    assert!(out.status.success());
    let doc = json(&out);
    let procs = doc["partition"]["processors"].as_array().unwrap();
    assert_eq!(procs.len(), 30);
    assert!(procs.iter().all(|p| p["N"].as_array().unwrap().len() == 3));

    let doc = json(&tetracomm(&["partition", "--q", "2", "--n", "30"]));
    assert_eq!(doc["partition"]["processors"].as_array().unwrap().len(), 10);

    let out = tetracomm(&["partition", "--q", "3", "--n", "100"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["padded_n"], 120);
    assert!(String::from_utf8_lossy(&out.stderr).contains("padding to 120"));
}

#[test]
fn schedule_step_counts() {
    let doc = json(&tetracomm(&["schedule", "--q", "3"]));
    assert_eq!(doc["meta"]["steps"], 26);
    let doc = json(&tetracomm(&["schedule", "--design", &fixture("steiner_8_4_3.txt")]));
    assert_eq!(doc["meta"]["steps"], 12);
}

#[test]
fn simulate_q2() {
    let out = tetracomm(&["simulate", "--q", "2", "--n", "30", "--seed", "11", "--mode", "p2p"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["report"]["max_volume"], 30);
    assert!(doc["verdicts"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    let doc = json(&tetracomm(&["simulate", "--q", "2", "--n", "30", "--seed", "11", "--mode", "alltoall"]));
    assert_eq!(doc["report"]["max_volume"], 36);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_policies() {
    let args = ["simulate", "--q", "2", "--n", "30", "--seed", "4"];
    let a = tetracomm(&args);
    let b = tetracomm(&args);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let c = tetracomm(&seq);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn simulate_csv_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("a.pst");
    let v = dir.path().join("x.vec");
    let out = tetracomm(&["gen", "--n", "30", "--seed", "2", "--tensor", t.to_str().unwrap(), "--vector", v.to_str().unwrap()]);
    assert!(out.status.success());
    let csv_path = dir.path().join("v.csv");
    let out = tetracomm(&[
        "simulate", "--q", "2", "--n", "30", "--tensor", t.to_str().unwrap(), "--vector", v.to_str().unwrap(),
        "--format", "csv", "--out", csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "id");
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| &r[1] == "30"));
}

#[test]
fn bounds_and_drivers() {
    let doc = json(&tetracomm(&["bounds", "--n", "120", "--p", "30"]));
    assert!((doc["lower_bound"].as_f64().unwrap() - 68.5937).abs() < 1e-3);
    assert_eq!(doc["opt"].as_array().unwrap().len(), 2);

    let out = tetracomm(&["hopm", "--n", "20", "--seed", "3", "--tol", "1e-10"]);
    assert!(out.status.success());
    let doc = json(&out);
    assert_eq!(doc["converged"], true);
    assert_eq!(doc["x"].as_array().unwrap().len(), 20);

    let doc = json(&tetracomm(&["cpgrad", "--n", "5", "--r", "2", "--seed", "1", "--exact"]));
    assert!(doc["norm"].as_f64().unwrap() < 1e-10);

    let out = tetracomm(&["hbl-fuzz", "--trials", "500", "--seed", "1"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["symm_failures"], 0);
}
