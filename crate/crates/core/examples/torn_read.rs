//! A reader assembles a value word by word while two writers race. Without
//! a lock it can see a mix of both writes; with an encapsulated lock it can't.

use commcheck::{builtin_scenario, explore, find_shortest, ViolationKind};

fn main() {
    for name in ["torn-read-raw", "torn-read-locked", "undisciplined-third-party"] {
        let sc = builtin_scenario(name).expect("built-in");
        let report = explore(&sc, sc.bounds);
        println!("{name}: {} states, violations {:?}", report.states_visited, report.classes());
        if let Some(v) = find_shortest(&sc, &ViolationKind::TornRead, sc.bounds) {
            println!("  shortest tear ({} steps): {}", v.trace.len(), v.detail);
            for e in &v.trace.events {
                println!("    {e}");
            }
        }
    }
}
