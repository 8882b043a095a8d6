use commcheck::scenarios::catalog::document;
use commcheck::{builtin_scenario, catalog, explore, recheck, ViolationKind};

#[test]
fn every_entry_matches_its_expectation() {
    let entries = catalog();
    assert_eq!(entries.len(), 14);
    for entry in entries {
        let check = entry.check();
        assert!(check.passed, "{check}");
    }
}

#[test]
fn documents_are_named_after_their_files() {
    for entry in catalog() {
        let text = document(entry.name()).unwrap();
        assert!(text.contains(&format!("name: \"{}\"", entry.name())));
    }
    assert!(builtin_scenario("decomposition-relay").is_some());
    assert!(builtin_scenario("nope").is_none());
}

#[test]
fn duplex_strict_never_misroutes() {
    let sc = builtin_scenario("duplex-strict").unwrap();
    let report = explore(&sc, sc.bounds);
    assert!(report.violation(&ViolationKind::WrongRecipient).is_none());
    assert!(report.distinct_terminal_states >= 1);
}

#[test]
fn last_message_duplex_loses_only_its_own_outgoing_messages() {
    let sc = builtin_scenario("duplex-last-message").unwrap();
    let report = explore(&sc, sc.bounds);
    let v = report.violation(&ViolationKind::LostMessage).unwrap();
    assert!(recheck(&sc, &v.trace).unwrap().contains(&ViolationKind::LostMessage));
    assert!(report.classes().iter().all(|k| !matches!(k, ViolationKind::MonitorAssert(_))));
}

#[test]
fn locking_discipline_only_holds_when_everyone_locks() {
    let locked = builtin_scenario("torn-read-locked").unwrap();
    let intruded = builtin_scenario("undisciplined-third-party").unwrap();
    assert!(explore(&locked, locked.bounds).violations.is_empty());
    let report = explore(&intruded, intruded.bounds);
    let v = report.violation(&ViolationKind::TornRead).unwrap();
    // The intruder takes part in the counterexample.
    assert!(v.trace.events.iter().any(|e| e.process.index() == 2));
}

#[test]
fn indirect_fix_removes_the_deadlock() {
    let broken = builtin_scenario("deadlock-direct-duplex").unwrap();
    let fixed = builtin_scenario("deadlock-fixed-indirect").unwrap();
    let b = explore(&broken, broken.bounds);
    assert_eq!(b.deadlock_states, 1);
    assert_eq!(b.distinct_terminal_states, 0);
    let f = explore(&fixed, fixed.bounds);
    assert_eq!(f.deadlock_states, 0);
    assert!(f.distinct_terminal_states >= 1);
}
