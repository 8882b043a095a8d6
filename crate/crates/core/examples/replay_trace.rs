//! Counterexamples are plain documents: serialize one, read it back, and
//! replay it step by step against the scenario.

use commcheck::explorer::ExplorationReport;
use commcheck::{builtin_scenario, explore, recheck, Kernel};

fn main() {
    let sc = builtin_scenario("lost-message-basic").expect("built-in");
    let document = explore(&sc, sc.bounds).to_document();
    let report = ExplorationReport::from_document(&document).expect("round trip");
    let violation = &report.violations[0];
    println!("recorded {} after {} steps", violation.kind, violation.trace.len());

    let kernel = Kernel::new(&sc);
    let mut state = kernel.initial_state();
    for (i, event) in violation.trace.events.iter().enumerate() {
        let choice = kernel.resolve(i, event).expect("known names");
        state = kernel.step(&state, &choice).expect("still enabled");
        let m = choice.mechanism.expect("every step here touches the cell");
        println!("{i:>3}  {event:<30} => {}", state.mechanisms[m]);
    }
    println!("reached state {}", state.hash_hex());
    println!("violations at the last step: {:?}", recheck(&sc, &violation.trace).expect("replays"));
}
