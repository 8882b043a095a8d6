//! Two processes each increment a shared register three times. Divisible
//! read-compute-write increments can lose updates; atomic updates cannot.

use std::collections::BTreeSet;

use commcheck::mechanisms::MechanismState;
use commcheck::{builtin_scenario, explore_visiting};

fn terminal_values(name: &str) -> BTreeSet<u8> {
    let sc = builtin_scenario(name).expect("built-in");
    let r = sc.mechanism_index("r").expect("register r");
    let mut values = BTreeSet::new();
    explore_visiting(&sc, sc.bounds, |state| {
        if let MechanismState::SharedRegister(reg) = &state.mechanisms[r] {
            values.insert(reg.content.word(0));
        }
    });
    values
}

fn main() {
    println!("divisible increments end with r in {:?}", terminal_values("register-lost-update"));
    println!("atomic increments end with r in {:?}", terminal_values("register-atomic-update"));
}
