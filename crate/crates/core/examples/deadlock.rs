//! Two processes that both send first over direct channels wait on each
//! other forever. Buffering one direction through a status channel fixes it.

use commcheck::{builtin_scenario, explore, Kernel};

fn main() {
    let broken = builtin_scenario("deadlock-direct-duplex").expect("built-in");
    let kernel = Kernel::new(&broken);
    let init = kernel.initial_state();
    println!("enabled in the initial state: {:?}", kernel.enabled_actions(&init));
    let report = explore(&broken, broken.bounds);
    println!("direct: {} deadlocked state(s)", report.deadlock_states);

    let fixed = builtin_scenario("deadlock-fixed-indirect").expect("built-in");
    let report = explore(&fixed, fixed.bounds);
    println!(
        "indirect: {} deadlocked state(s), {} terminal state(s), violations {:?}",
        report.deadlock_states,
        report.distinct_terminal_states,
        report.classes()
    );
}
