//! End-to-end runs of the binary: exit codes, artifacts and determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gap-minmax"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_levels_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve", "--kappa", "-1", "--nu", "0.5", "--split", "talman", "--kmax", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("out/solve.json"));
    let lambda = v["levels"][0]["lambda"].as_f64().unwrap();
    assert!((lambda - 0.8660254037844386).abs() <= 1e-6);
    assert!(v["abs_error"][0].as_f64().unwrap() <= 1e-6);
    let data = fs::read_to_string(dir.path().join("out/solve.dat")).unwrap();
    assert_eq!(data.lines().nth(1).unwrap().split_whitespace().count(), 2);
}

#[test]
fn splittings_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    for split in ["talman", "free-energy"] {
        let out = run(
            dir.path(),
            &["solve", "--kappa", "-1", "--nu", "0.5", "--split", split, "--kmax", "3", "--out", split],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let t = json(&dir.path().join("talman/solve.json"));
    let f = json(&dir.path().join("free-energy/solve.json"));
    for k in 0..3 {
        let (a, b) = (t["levels"][k]["lambda"].as_f64().unwrap(), f["levels"][k]["lambda"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-6, "k={k}: {a} vs {b}");
    }
}

#[test]
fn free_operator_has_no_bracket() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["solve", "--kappa", "-1", "--nu", "0.0", "--kmax", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no gap eigenvalue bracket"));
    assert!(!dir.path().join("out").exists(), "no artifacts on failure");
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["solve", "--bogus"])), 1);
    assert_eq!(code(&run(dir.path(), &["solve", "--nu", "1.5"])), 1);
    assert_eq!(code(&run(dir.path(), &["solve", "--split", "sideways"])), 1);
    fs::write(dir.path().join("run.cfg"), "nu = 0.5\ncolour = blue\n").unwrap();
    let out = run(dir.path(), &["--config", "run.cfg", "solve"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# channel\nkappa = -1\nnu = 0.3\nkmax = 2\n").unwrap();
    let out = run(dir.path(), &["--config", "run.cfg", "solve", "--nu", "0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("out/solve.json"));
    assert_eq!(v["levels"].as_array().unwrap().len(), 2);
    assert_eq!(v["channel"]["potential"]["nu"].as_f64().unwrap(), 0.5);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run(dir.path(), &["verify", "--fuzz", "40", "--dim", "4:12", "--seed", "7", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(dir.path(), &["hardy", "--count", "20", "--nu", "1.0", "--seed", "3", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["verify.json", "hardy.json", "hardy.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    assert!(dir.path().join("a/manifest.json").exists());
}

#[test]
fn fuzz_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "--fuzz", "500", "--dim", "12", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("out/verify.json"));
    assert_eq!(v["fuzz"]["agreements"].as_u64().unwrap(), 500);
}

#[test]
fn counterexample_matrix_fails_verification_with_replay() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("counterexample.txt"), "1 1\n-2 0\n0 -1\n").unwrap();
    let out = run(dir.path(), &["verify", "--matrix", "counterexample.txt"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("replay"));
    let entries: Vec<_> = fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("replay.txt")]);

    // the replay file is itself a valid matrix input
    let out = run(dir.path(), &["matrix", "--file", "out/replay.txt"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn channel_properties_and_matrix_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "--channel-properties", "--nu", "0.5", "--kappa", "-1", "--samples", "50"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    fs::write(dir.path().join("two.txt"), "1 1\n1 1\n1 -1\n").unwrap();
    let out = run(dir.path(), &["matrix", "--file", "two.txt", "--out", "m"]);
    assert_eq!(code(&out), 0);
    let v = json(&dir.path().join("m/matrix.json"));
    assert!((v["levels"][0]["lambda"].as_f64().unwrap() - 2f64.sqrt()).abs() <= 1e-10);
}

#[test]
fn sweep_and_refinement_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sweep", "--kappa", "-1", "--eps", "0.1", "--nu-grid", "0:0.9:0.1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(csv.starts_with("nu,epsilon,lambda1,a_nu,pass\n"));
    for line in csv.lines().skip(1) {
        let lambda: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(lambda >= 0.0);
    }
    let out = run(dir.path(), &["sweep", "--refine", "--nu", "0.5", "--eps-list", "0.2,0.1,0.05,0.01", "--out", "r"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let values: Vec<f64> = fs::read_to_string(dir.path().join("r/refine.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(values.iter().all(|&v| v > 0.75f64.sqrt()));
}

#[test]
fn hardy_margins_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["hardy", "--family", "random", "--count", "200", "--nu", "1.0", "--kappa", "-1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("out/hardy.json"));
    for s in v["summaries"].as_array().unwrap() {
        assert!(s["min_relative"].as_f64().unwrap() >= -1e-10, "{s}");
    }
    let out = run(dir.path(), &["report", "out/hardy.json"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("talman-inhomogeneous"));
    assert_eq!(code(&run(dir.path(), &["report", "missing.json"])), 1);
}
