use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calibrank"))
}

fn demo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/demo").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_twice_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = demo("files.toml");
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out_path = dir.path().join(name);
        let out = run(&[
            "sweep",
            "--config",
            path_str(&config),
            "--output",
            path_str(&out_path),
            "--seed",
            "11",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(format!("{name}.timings.csv")).exists());
        outputs.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("method,lambda,users,relevance"));
    assert_eq!(text.lines().count(), 1 + 4 * 5);
}

#[test]
fn synthetic_sweep_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("syn.csv");
    let out = run(&[
        "sweep",
        "--users",
        "4",
        "--n",
        "20",
        "--k",
        "8",
        "--methods",
        "lp_reduced,score_sort",
        "--lambdas",
        "0,1",
        "--output",
        path_str(&out_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn calibrate_decompose_and_sample() {
    let dir = tempfile::tempdir().unwrap();
    let policy = dir.path().join("policy.txt");
    let out = run(&[
        "calibrate",
        "--problem",
        path_str(&demo("problem.txt")),
        "--policy-out",
        path_str(&policy),
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ranking: Vec<u64> = stdout(&out).split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(ranking.len(), 3);
    assert!(ranking.iter().all(|id| (101..=106).contains(id)));

    let sampled = run(&["sample", "--policy", path_str(&policy), "--seed", "5"]);
    assert!(sampled.status.success());
    assert_eq!(stdout(&sampled), stdout(&run(&["sample", "--policy", path_str(&policy), "--seed", "5"])));

    let at_zero = run(&["calibrate", "--problem", path_str(&demo("problem.txt")), "--lambda", "0"]);
    assert_eq!(stdout(&at_zero).trim(), "101 102 103");

    let decomposed = dir.path().join("decomposed.txt");
    let out = run(&["decompose", "--matrix", path_str(&demo("matrix.txt")), "--output", path_str(&decomposed)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&decomposed).unwrap();
    let weights: f64 = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((weights - 1.0).abs() < 1e-9);
}

#[test]
fn validate_accepts_demo_and_rejects_bad_files() {
    let out = run(&[
        "validate",
        "--ratings",
        path_str(&demo("ratings.csv")),
        "--catalog",
        path_str(&demo("movies.csv")),
        "--scores",
        path_str(&demo("scores.csv")),
        "--problem",
        path_str(&demo("problem.txt")),
        "--matrix",
        path_str(&demo("matrix.txt")),
    ]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert_eq!(stdout(&out).trim(), "ok");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "0.5 0.6\n0.5 0.4\n").unwrap();
    let out = run(&["validate", "--matrix", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn errors_exit_with_code_two() {
    let out = run(&["calibrate", "--problem", "/nonexistent/problem.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = run(&["sweep", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
