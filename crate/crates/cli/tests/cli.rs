use std::fs;
use std::process::{Command, Output};

fn totlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_totlab"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve24_prints_steps_and_answer() {
    let text = stdout(&totlab(&["solve24", "4", "9", "10", "13"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("Answer: ") && lines[3].ends_with(" = 24"));

    let json = stdout(&totlab(&["solve24", "1", "4", "8", "8", "--json", "--all"]));
    for line in json.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["puzzle"], "1 4 8 8");
        assert_eq!(v["steps"].as_array().unwrap().len(), 3);
    }

    let none = totlab(&["solve24", "1", "1", "1", "1"]);
    assert!(!none.status.success());
    assert!(String::from_utf8_lossy(&none.stderr).contains("no solution"));
}

#[test]
fn puzzle_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    stdout(&totlab(&[
        "puzzles",
        "enum24",
        "--out",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1363);

    let kk = dir.path().join("kk.jsonl");
    stdout(&totlab(&[
        "kk",
        "gen",
        "--chars",
        "4",
        "--count",
        "5",
        "--seed",
        "3",
        "--out",
        kk.to_str().unwrap(),
    ]));
    let solved = stdout(&totlab(&["kk", "solve", "--in", kk.to_str().unwrap()]));
    assert_eq!(solved.lines().count(), 5);
    assert!(solved.lines().all(|l| l.split(", ").count() == 4));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let run = stdout(&totlab(&[
        "run",
        "--task",
        "kk",
        "--count",
        "10",
        "--generator",
        "oracle:p=1",
        "--discriminator",
        "oracle:p=1",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(run.contains("1.0000"), "{run}");
    for f in [
        "summary.csv",
        "sweep.csv",
        "quality.csv",
        "traces.jsonl",
        "records.jsonl",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = stdout(&totlab(&["report", "--in", out.to_str().unwrap()]));
    assert_eq!(report, run);
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        "method = \"tot\"\nmaster_seed = 9\n[tasks]\nkind = \"game24\"\ncount = 20\n",
    )
    .unwrap();
    let out = dir.path().join("s");
    let text = stdout(&totlab(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--axis",
        "disc",
        "--points",
        "0.5,1.0",
        "--include-random",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("random"));
    assert!(text.contains("0.50 -> 1.00"));
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 4);

    let bad = totlab(&[
        "sweep",
        "--task",
        "kk",
        "--axis",
        "gen",
        "--include-random",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!bad.status.success());
}
