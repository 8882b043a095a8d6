use std::path::PathBuf;
use std::process::Command;

use commcheck::cli::{self, parse_schedule, RunDocument};
use commcheck::explorer::ExplorationReport;
use commcheck::ViolationKind;

fn run(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["commcheck"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("commcheck-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn explore_exit_codes() {
    assert_eq!(run(&["explore", "--catalog", "deadlock-direct-duplex"]).0, 1);
    assert_eq!(run(&["explore", "--catalog", "status-channel-exact"]).0, 0);
    assert_eq!(run(&["explore", "--catalog", "dekker-mutex", "--max-depth", "4"]).0, 2);
    assert_eq!(run(&["explore", "--catalog", "no-such-scenario"]).0, 3);
}

#[test]
fn malformed_file_reports_position() {
    let path = temp_file("broken.ron", "(\n  name: \"x\",\n  mechanisms: [ (id: 1 ],\n)");
    let (code, _, err) = run(&["explore", "--file", path.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_file_lists_every_problem() {
    let doc = r#"(name: "bad", word_width: 9, mechanisms: [(id: "c", kind: "teleporter")],
        processes: [(id: 3, program: [Read(mech: "c", bind: "v")])])"#;
    let path = temp_file("invalid.ron", doc);
    let (code, _, err) = run(&["explore", "--file", path.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("teleporter"), "{err}");
    assert!(err.contains("word_width"), "{err}");
    assert!(err.contains("processes[0].id"), "{err}");
}

#[test]
fn usage_errors_exit_3_and_help_exits_0() {
    assert_eq!(run(&["frobnicate"]).0, 3);
    assert_eq!(run(&["explore"]).0, 3);
    assert_eq!(run(&["explore", "--catalog", "a", "--file", "b"]).0, 3);
    assert_eq!(run(&["replay", "--catalog", "torn-read-raw"]).0, 3);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("catalog-check"));
}

#[test]
fn structured_report_replays_and_confirms() {
    let (code, doc, _) = run(&["explore", "--catalog", "deadlock-direct-duplex", "--format", "structured"]);
    assert_eq!(code, 1);
    let report = ExplorationReport::from_document(&doc).unwrap();
    assert_eq!(report.classes().into_iter().collect::<Vec<_>>(), vec![ViolationKind::Deadlock]);
    let path = temp_file("deadlock-report.ron", &doc);
    let (code, out, err) = run(&["replay", "--catalog", "deadlock-direct-duplex", "--schedule", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("recorded violation Deadlock: confirmed"), "{out}");
}

#[test]
fn every_structured_trace_replays() {
    for entry in commcheck::catalog() {
        let name = entry.name().to_string();
        let (_, doc, _) = run(&["explore", "--catalog", &name, "--format", "structured"]);
        let report = ExplorationReport::from_document(&doc).unwrap();
        for v in &report.violations {
            let again = commcheck::recheck(&entry.scenario, &v.trace).unwrap();
            assert!(again.contains(&v.kind), "{name}: {}", v.kind);
        }
    }
}

#[test]
fn text_and_structured_agree() {
    for name in ["torn-read-raw", "lost-message-basic", "duplex-last-message", "status-channel-exact"] {
        let (c1, text, _) = run(&["explore", "--catalog", name]);
        let (c2, doc, _) = run(&["explore", "--catalog", name, "--format", "structured"]);
        assert_eq!(c1, c2);
        let report = ExplorationReport::from_document(&doc).unwrap();
        assert!(text.contains(&format!("violations: {}", if report.violations.is_empty() {
            "none".to_string()
        } else {
            report.violations.len().to_string()
        })));
        for v in &report.violations {
            assert!(text.contains(&format!("{} x{}", v.kind, v.occurrences)), "{name}: {text}");
        }
    }
}

#[test]
fn replay_of_empty_trace_prints_initial_state() {
    let path = temp_file("empty.ron", "(events: [])");
    let (code, out, _) = run(&["replay", "--catalog", "status-channel-exact", "--schedule", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("initial state"), "{out}");
}

#[test]
fn replay_of_illegal_trace_names_the_step() {
    let doc = "(events: [(process: 0, action: Write(Some([1, 1])), mechanism: \"c\"), \
               (process: 0, action: Write(Some([2, 2])), mechanism: \"c\")])";
    let path = temp_file("illegal.ron", doc);
    let (code, _, err) = run(&["replay", "--catalog", "status-channel-exact", "--schedule", path.to_str().unwrap()]);
    assert_eq!(code, 3);
    assert!(err.contains("event 1"), "{err}");
}

#[test]
fn replay_refutes_a_violation_that_does_not_recur() {
    let (_, doc, _) = run(&["explore", "--catalog", "torn-read-raw", "--format", "structured"]);
    let mut report = ExplorationReport::from_document(&doc).unwrap();
    // Drop the final read: the prefix is legal but no longer tears.
    report.violations[0].trace.events.pop();
    let path = temp_file("truncated.ron", &report.to_document());
    let (code, out, _) = run(&["replay", "--catalog", "torn-read-raw", "--schedule", path.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("NOT reproduced"));
}

#[test]
fn run_extends_a_prefix_and_its_output_replays() {
    let prefix = temp_file("prefix.ron", "");
    let (code, doc, err) = run(&[
        "run",
        "--catalog",
        "status-channel-exact",
        "--schedule",
        prefix.to_str().unwrap(),
        "--format",
        "structured",
    ]);
    assert_eq!(code, 0, "{err}");
    let parsed: RunDocument = ron::from_str(&doc).unwrap();
    assert!(parsed.terminated);
    assert_eq!(parsed.trace.len(), 6);
    let path = temp_file("run.ron", &doc);
    let (trace, _) = parse_schedule(&doc).unwrap();
    assert_eq!(trace, parsed.trace);
    assert_eq!(run(&["replay", "--catalog", "status-channel-exact", "--schedule", path.to_str().unwrap()]).0, 0);

    let (code, out, _) = run(&["run", "--catalog", "deadlock-direct-duplex", "--schedule", prefix.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("deadlocked"));
}

#[test]
fn list_and_catalog_check_filter() {
    let (code, out, _) = run(&["list"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 14);
    let (code, out, _) = run(&["catalog-check", "--only", "dekker-mutex"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.starts_with("pass")).count(), 1);
    assert_eq!(run(&["catalog-check", "--only", "nope"]).0, 3);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_commcheck");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["explore", "--catalog", "deadlock-direct-duplex"]), Some(1));
    assert_eq!(status(&["explore", "--catalog", "torn-read-locked"]), Some(0));
    assert_eq!(status(&["bogus"]), Some(3));
}
