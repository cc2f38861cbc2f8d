use std::process::{Command, Output};

fn crafem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crafem")).args(args).env_remove("CRAFEM_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn solve_prints_the_diagonal_value() {
    let o = crafem(&["solve", "--problem", "square-poisson-f1", "--refine-uniform", "0"]);
    assert!(o.status.success());
    let row = stdout(&o).lines().find(|l| l.starts_with("0.5,0.5,0,")).unwrap().to_string();
    let u: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((u - 1.0 / 24.0).abs() < 1e-15);
}

#[test]
fn solve_json_with_reference() {
    let o = crafem(&["solve", "--problem", "square-stokes-manufactured", "--refine-uniform", "2", "--kref", "1", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["elements"], 32);
    assert!(v["reference_distance"].as_f64().unwrap() > 0.0);
    assert!(v["exact_error"].as_f64().unwrap() > 0.0);
    assert_eq!(v["pressure"].as_array().unwrap().len(), 32);
}

#[test]
fn afem_trace_is_monotone_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = crafem(&["afem", "--problem", "lshape-poisson", "--mu", "0.5", "--max-elems", "4000", "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let text = String::from_utf8(text).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "energy").unwrap();
    let g: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert!(g.len() > 3);
    assert!(g.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn verify_exact_passes() {
    let o = crafem(&["verify", "--suite", "exact", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"]["exact"]["verdict"], "pass");
}

#[test]
fn verify_energy_and_diamond_suites() {
    for suite in ["energy", "diamond", "stability"] {
        let o = crafem(&["verify", "--suite", suite, "--cases", "10", "--problem", "square-poisson-f1"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn enumerate_census() {
    let o = crafem(&["enumerate", "--problem", "square-poisson-f1", "--budget", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "bisections,meshes\n0,1\n1,1\n2,4\n");
    let o = crafem(&["enumerate", "--problem", "square-poisson-f1", "--budget", "2", "--cap", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_marking_lists_three_strategies() {
    let o = crafem(&["compare-marking", "--problem", "lshape-poisson-f1", "--max-elems", "1000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for s in ["modified-max(0.5)", "dorfler(0.5)", "max(0.5)"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{s},"))), "{s}");
    }
}

#[test]
fn errors_give_nonzero_exit_codes() {
    assert_eq!(crafem(&["solve", "--problem", "no-such-problem"]).status.code(), Some(2));
    assert_eq!(crafem(&["afem", "--mu", "abc"]).status.code(), Some(2));
    assert_eq!(crafem(&["afem", "--mu", "1.5"]).status.code(), Some(2));
    assert_eq!(crafem(&["frobnicate"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_crafem"))
        .args(["problems"])
        .env("CRAFEM_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_crafem"))
        .args(["problems", "--format", "json"])
        .env("CRAFEM_WORKERS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 5);
}
