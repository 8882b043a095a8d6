//! Acceptance run: one pass/fail line per criterion. Runs without the test
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use commcheck::explorer::{explore, explore_visiting, find_shortest, random_walks, recheck, Bounds};
use commcheck::mechanisms::MechanismState;
use commcheck::scenarios::catalog::{builtin_scenario, observations};
use commcheck::{catalog, cli, Kernel, Scenario, Trace, ViolationKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenario(name: &str) -> Result<Scenario, String> {
    builtin_scenario(name).ok_or_else(|| format!("missing scenario {name}"))
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn catalog_conformance() -> Outcome {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(["commcheck", "catalog-check"], &mut out, &mut err);
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out);
    let passing = text.lines().filter(|l| l.starts_with("pass")).count();
    ensure(code == 0, || format!("exit {code}:\n{text}"))?;
    ensure(passing == 14, || format!("{passing} of 14 rows pass"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("14/14 scenarios match in {:.2?}", elapsed))
}

/// Every schedule of exactly `len` steps from the initial state.
fn schedules_of_length(scenario: &Scenario, len: usize) -> Vec<Trace> {
    let kernel = Kernel::new(scenario);
    let mut out = Vec::new();
    let mut stack = vec![(kernel.initial_state(), Vec::new())];
    while let Some((state, path)) = stack.pop() {
        if path.len() == len {
            out.push(kernel.to_trace(&path));
            continue;
        }
        for t in kernel.successors(&state) {
            let mut next = path.clone();
            next.push(t.choice);
            stack.push((t.state, next));
        }
    }
    out
}

fn problem_reproduction() -> Outcome {
    use ViolationKind::*;
    let mut summary = Vec::new();
    for (name, kind) in [
        ("torn-read-raw", TornRead),
        ("lost-message-basic", LostMessage),
        ("undisciplined-third-party", TornRead),
        ("deadlock-direct-duplex", Deadlock),
    ] {
        let sc = scenario(name)?;
        let report = explore(&sc, sc.bounds);
        let count = report.violation(&kind).map_or(0, |v| v.occurrences);
        ensure(count >= 1, || format!("{name}: no {kind}"))?;
        let v = find_shortest(&sc, &kind, sc.bounds).ok_or_else(|| format!("{name}: find_shortest found nothing"))?;
        Kernel::new(&sc).replay(&v.trace).map_err(|e| format!("{name}: {e}"))?;
        let again = recheck(&sc, &v.trace).map_err(|e| format!("{name}: {e}"))?;
        ensure(again.contains(&kind), || format!("{name}: replay does not reproduce {kind}"))?;
        // Minimality against brute force: no shorter schedule ends in the class.
        for len in 0..v.trace.len() {
            for t in schedules_of_length(&sc, len) {
                let classes = recheck(&sc, &t).map_err(|e| e.to_string())?;
                ensure(!classes.contains(&kind), || format!("{name}: shorter {kind} of length {len} exists"))?;
            }
        }
        summary.push(format!("{name} {kind} x{count} min {}", v.trace.len()));
    }
    Ok(summary.join(", "))
}

fn solution_verification() -> Outcome {
    let mut summary = Vec::new();
    for name in ["torn-read-locked", "status-channel-exact", "deadlock-fixed-indirect", "duplex-strict"] {
        let sc = scenario(name)?;
        let report = explore(&sc, sc.bounds);
        ensure(!report.bounds_hit, || format!("{name}: bounds hit"))?;
        ensure(report.violations.is_empty(), || format!("{name}: {:?}", report.classes()))?;
        ensure(report.distinct_terminal_states > 0, || format!("{name}: never terminates"))?;
        summary.push(format!("{name} {} states", report.states_visited));
    }
    Ok(summary.join(", "))
}

fn exactly_once_in_order() -> Outcome {
    let sc = scenario("status-channel-exact")?;
    let c = sc.mechanism_index("c").ok_or("no channel c")?;
    let consumer = sc.process_by_name("consumer").ok_or("no consumer")?;
    let want: Vec<_> = [[1, 1], [2, 2], [3, 3]].iter().map(|w| commcheck::Value::new(w.to_vec()).unwrap()).collect();
    let mut terminals = 0;
    let mut bad = Vec::new();
    let report = explore_visiting(&sc, sc.bounds, |s| {
        terminals += 1;
        let log = &s.ghost.channels[c];
        let received: Vec<_> = s.processes[consumer.index()].locals.iter().flatten().cloned().collect();
        if log.sent != want || log.received != log.sent || received != want {
            bad.push(format!("sent {:?} received {:?}", log.sent, received));
        }
    });
    ensure(!report.bounds_hit, || "bounds hit".into())?;
    ensure(report.states_visited < 10_000, || format!("{} states", report.states_visited))?;
    ensure(terminals > 0, || "no terminal state".into())?;
    ensure(bad.is_empty(), || bad.join("; "))?;
    ensure(report.violations.is_empty(), || format!("{:?}", report.classes()))?;
    Ok(format!("{terminals} terminal states over {} states, all received = sent", report.states_visited))
}

fn terminal_register_values(name: &str) -> Result<BTreeSet<u8>, String> {
    let sc = scenario(name)?;
    let r = sc.mechanism_index("r").ok_or("no register r")?;
    let mut values = BTreeSet::new();
    let report = explore_visiting(&sc, sc.bounds, |s| {
        if let MechanismState::SharedRegister(reg) = &s.mechanisms[r] {
            values.insert(reg.content.word(0));
        }
    });
    ensure(!report.bounds_hit, || format!("{name}: bounds hit"))?;
    Ok(values)
}

fn lost_update() -> Outcome {
    let lossy = terminal_register_values("register-lost-update")?;
    let atomic = terminal_register_values("register-atomic-update")?;
    ensure(lossy.contains(&2) && lossy.contains(&6), || format!("lost-update terminals {lossy:?}"))?;
    ensure(atomic == BTreeSet::from([6]), || format!("atomic terminals {atomic:?}"))?;
    Ok(format!("divisible {lossy:?}, atomic {atomic:?}"))
}

fn schedule_count() -> Outcome {
    let doc = r#"(
        name: "independent",
        word_width: 1,
        mechanisms: [(id: "r0", kind: "shared_register"), (id: "r1", kind: "shared_register")],
        processes: [
            (id: 0, program: [Update(mech: "r0", function: "inc"), Update(mech: "r0", function: "inc"), Update(mech: "r0", function: "inc")]),
            (id: 1, program: [Update(mech: "r1", function: "inc"), Update(mech: "r1", function: "inc"), Update(mech: "r1", function: "inc")]),
        ],
    )"#;
    let sc = commcheck::load(doc).map_err(|e| e.to_string())?;
    let factorial = |n: u64| (1..=n).product::<u64>();
    let expected = factorial(6) / (factorial(3) * factorial(3));
    let report = explore(&sc, Bounds::default());
    ensure(report.schedules_complete == Some(expected), || {
        format!("schedules {:?}, expected {expected}", report.schedules_complete)
    })?;
    Ok(format!("schedules_complete = {expected} = C(6,3)"))
}

fn dekker() -> Outcome {
    let sc = scenario("dekker-mutex")?;
    let monitored = sc.monitors.iter().any(|m| matches!(m, commcheck::scenarios::Monitor::MutualExclusion { .. }));
    ensure(monitored, || "no mutual exclusion monitor".into())?;
    let report = explore(&sc, sc.bounds);
    ensure(!report.bounds_hit, || "bounds hit".into())?;
    ensure(report.violations.is_empty(), || format!("{:?}", report.classes()))?;
    ensure(report.distinct_terminal_states > 0, || "never terminates".into())?;

    // The same monitor must notice two processes entering unguarded.
    let unguarded = r#"(
        name: "no-protocol",
        word_width: 1,
        mechanisms: [(id: "x", kind: "raw_cell")],
        processes: [
            (id: 0, program: [Critical(section: "cs", body: [WriteWord(mech: "x", index: 0, word: Lit(1))])]),
            (id: 1, program: [Critical(section: "cs", body: [WriteWord(mech: "x", index: 0, word: Lit(2))])]),
        ],
        monitors: [MutualExclusion(section: "cs")],
    )"#;
    let broken = commcheck::load(unguarded).map_err(|e| e.to_string())?;
    let classes = explore(&broken, Bounds::default()).classes();
    ensure(!classes.is_empty(), || "monitor misses an unguarded entry".into())?;
    Ok(format!("{} states, mutual exclusion holds, no deadlock", report.states_visited))
}

fn decomposition() -> Outcome {
    let cell = scenario("decomposition-equivalence")?;
    let relay = scenario("decomposition-relay")?;
    let reader = |sc: &Scenario| sc.process_by_name("reader").ok_or("no reader process");
    let (r1, mine) = observations(&cell, reader(&cell)?.index());
    let (r2, theirs) = observations(&relay, reader(&relay)?.index());
    ensure(!r1.bounds_hit && !r2.bounds_hit, || "bounds hit".into())?;
    ensure(mine == theirs, || format!("cell {mine:?} vs relay {theirs:?}"))?;
    ensure(!mine.is_empty(), || "no observations".into())?;
    Ok(format!("{} identical observation sequences", mine.len()))
}

fn cross_validation() -> Outcome {
    let mut walked = 0;
    for entry in catalog() {
        let sc = &entry.scenario;
        let report = explore(sc, sc.bounds);
        let exhaustive = report.classes();
        let walks = random_walks(sc, 10_000, sc.bounds.max_depth, 0x5eed);
        let extra: Vec<_> = walks.classes().difference(&exhaustive).cloned().collect();
        ensure(extra.is_empty(), || format!("{}: random walks found {extra:?}", sc.name))?;
        for (kind, trace) in &walks.witnesses {
            let again = recheck(sc, trace).map_err(|e| format!("{}: {e}", sc.name))?;
            ensure(again.contains(kind), || format!("{}: walk witness of {kind} does not replay", sc.name))?;
        }
        for v in &report.violations {
            let again = recheck(sc, &v.trace).map_err(|e| format!("{}: {e}", sc.name))?;
            ensure(again.contains(&v.kind), || format!("{}: {} does not replay", sc.name, v.kind))?;
        }
        walked += walks.walks;
    }
    Ok(format!("{walked} random schedules, no class beyond the exhaustive reports, every class replays"))
}

fn determinism() -> Outcome {
    for entry in catalog() {
        let sc = &entry.scenario;
        let a = explore(sc, sc.bounds);
        let b = explore(sc, sc.bounds);
        ensure(a == b, || format!("{}: reports differ", sc.name))?;
        ensure(a.to_document() == b.to_document(), || format!("{}: documents differ", sc.name))?;
    }
    Ok("two runs per scenario give identical reports (parallel exploration not implemented)".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("catalog conformance", catalog_conformance),
        ("problem reproduction", problem_reproduction),
        ("solution verification", solution_verification),
        ("exactly-once in-order", exactly_once_in_order),
        ("lost-update oracle", lost_update),
        ("schedule count", schedule_count),
        ("dekker verification", dekker),
        ("decomposition equivalence", decomposition),
        ("explorer cross-validation", cross_validation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
