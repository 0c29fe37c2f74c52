use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastobeam"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_medium(dir: &Path, text: &str) -> String {
    let p = dir.join("medium.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_reference_and_file_media() {
    let o = run(&["validate"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("all invariants hold"));

    let dir = tempfile::tempdir().unwrap();
    let m = write_medium(
        dir.path(),
        "lambda = \"2 + 0.1 * x1\"\nmu = 1\nrho = 1\nA = 0.3\nB = 0.2\nC = 0\n",
    );
    assert_eq!(code(&run(&["validate", "--medium", &m])), 0);

    let bad = write_medium(dir.path(), "lambda = 1\nmu = \"0.5 - x1\"\nrho = 1\n");
    assert_eq!(code(&run(&["validate", "--medium", &bad])), 1);
}

#[test]
fn recover_reference_medium() {
    let o = run(&["recover", "--points", "0,0,0;0.2,0.1,-0.3"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 2);
    for p in pts {
        for (k, want) in [("lambda", 2.0), ("mu", 1.0), ("rho", 1.0), ("A", 0.3), ("B", 0.2)] {
            let got = p[k].as_f64().unwrap();
            assert!((got - want).abs() < 1e-9, "{k}: {got}");
        }
        assert_eq!(p["C"], "not determined by this pipeline");
    }
}

#[test]
fn output_directory_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["trace", "--out", out])), 0);
    assert_eq!(
        code(&run(&[
            "interact", "--kind", "inplane", "--angles", "0.2,0.5", "--out", out
        ])),
        0
    );
    for f in ["path.csv", "trace.json", "interact.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("interact.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn check_is_deterministic() {
    let args = ["check", "--seed", "42", "--draws", "2000", "--rays", "6"];
    let a = run(&args);
    let b = run(&[&args[..], &["--jobs", "1"]].concat());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write_medium(dir.path(), "lambda = 1\nmu = \"1 +\"\nrho = 1\n");
    let cases: Vec<Vec<&str>> = vec![
        vec!["validate", "--medium", "/nonexistent/medium.toml"],
        vec!["validate", "--medium", &broken],
        vec!["trace", "--domain", "cube:1"],
        vec!["trace", "--x0", "3,0,0"],
        vec!["interact", "--kind", "inplane", "--angles", "3.0"],
        vec!["recover", "--tol", "0"],
        vec!["frobnicate"],
    ];
    for c in cases {
        let o = run(&c);
        assert_eq!(code(&o), 2, "{c:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
