use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use irqueue_cli::{run_cli, EXIT_FAILURES, EXIT_OK, EXIT_USAGE};

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("irqueue").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Compares against a committed golden; `IRQUEUE_BLESS=1` rewrites it.
fn assert_golden(name: &str, actual: &str) {
    let path: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/goldens")
        .join(name);
    if std::env::var_os("IRQUEUE_BLESS").is_some() {
        fs::write(&path, actual).unwrap();
    }
    let expected = fs::read_to_string(&path).unwrap_or_default();
    assert_eq!(actual, expected, "golden {name} differs");
}

#[test]
fn run_serial_prints_fifo_drain() {
    let (code, out, err) = cli(&["run", &scenario("serial_abc.scn")]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("drain order: A B C\n"));
    assert!(out.contains("displacement (completion): A +0, B +0, C +0\n"));
    assert!(out.contains("displacement (arrival): A +0, B +0, C +0\n"));
    assert_golden("run_serial_abc.out", &out);
}

#[test]
fn run_overtake_uses_embedded_schedule() {
    let (code, out, _) = cli(&["run", &scenario("overtake.scn")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("drain order: A C B\n"));
    assert!(out.contains("displacement (arrival): A +0, C -1, B +1\n"));
    assert_golden("run_overtake.out", &out);
}

#[test]
fn explore_two_level_matches_golden() {
    let (code, out, _) = cli(&["explore", &scenario("two_level.scn")]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("failures: 0\n"));
    assert_golden("explore_two_level.out", &out);
}

#[test]
fn fuzz_output_is_stable() {
    let args = ["fuzz", &scenario("fuzz_template.scn"), "--seed", "42", "--iters", "1000"];
    let (code, first, _) = cli(&args);
    let (_, second, _) = cli(&args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(first, second);
    assert_golden("fuzz_template_seed42.out", &first);
}

#[test]
fn dequeue_above_level_zero_is_a_usage_error() {
    let (code, out, err) = cli(&["run", &scenario("bogus.scn")]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("P operations may only run at level 0"), "{err}");
}

#[test]
fn usage_errors_are_one_line() {
    for args in [
        vec!["frobnicate"],
        vec![],
        vec!["fuzz", "x.scn", "--seed", "1", "--iters", "0"],
        vec!["run", "/nonexistent/file.scn"],
        vec!["check", "/nonexistent/trace.jsonl"],
    ] {
        let (code, _, err) = cli(&args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn help_exits_cleanly() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("explore"));
}

#[test]
fn schedule_file_overrides_and_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.sched");
    fs::write(&good, "# level 2 first\nstart:1\n").unwrap();
    let (code, out, _) = cli(&["run", &scenario("two_level.scn"), "--schedule", good.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("schedule: start:1 "), "{out}");
    assert!(out.contains("drain order: B A\n"));

    let bad = dir.path().join("bad.sched");
    fs::write(&bad, "start:0 start:0").unwrap();
    let (code, _, err) = cli(&["run", &scenario("two_level.scn"), "--schedule", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("step 1"), "{err}");
}

#[test]
fn traces_round_trip_through_check() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let t = trace.to_str().unwrap();
    let (code, _, _) = cli(&["run", &scenario("overtake.scn"), "--trace", t]);
    assert_eq!(code, EXIT_OK);
    let (code, out, err) = cli(&["check", t]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("drain order: A C B\n"));
    assert!(out.contains("failures: 0\n"));

    let text = fs::read_to_string(&trace).unwrap();
    let doctored = text.replacen(r#""value":"B""#, r#""value":"C""#, 1);
    fs::write(&trace, doctored).unwrap();
    let (code, out, _) = cli(&["check", t]);
    assert_eq!(code, EXIT_FAILURES);
    assert!(out.starts_with("trace rejected"), "{out}");

    fs::write(&trace, "not json\n").unwrap();
    let (code, _, err) = cli(&["check", t]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn every_shipped_scenario_is_clean() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name == "bogus.scn" {
            continue;
        }
        let (code, out, err) = cli(&["run", path.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{name}: {out}{err}");
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_irqueue");
    let ok = Command::new(bin)
        .args(["run", &scenario("serial_abc.scn")])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("drain order: A B C"));
    let bad = Command::new(bin)
        .args(["run", &scenario("bogus.scn")])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
