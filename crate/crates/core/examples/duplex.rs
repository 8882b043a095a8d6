//! One shared location carrying traffic in both directions. The strict
//! variant never returns a process its own message; the last-message variant
//! lets a side replace its unread outgoing message.

use commcheck::mechanisms::DuplexChannel;
use commcheck::{builtin_scenario, explore, ProcessId, Value};

fn main() {
    let (a, b) = (ProcessId(0), ProcessId(1));
    let ch = DuplexChannel::new(a, b, false);
    let v = |w: u8| Value::new(vec![w, w]).expect("valid");
    let sent = ch.write(a, v(1)).expect("empty channel accepts a write");
    println!("after a writes: {}", commcheck::MechanismState::DuplexChannel(sent.clone()));
    println!("a may read its own message: {}", sent.read(a).is_some());
    println!("b may read it: {}", sent.read(b).is_some());
    println!("a may write again: {}", sent.write(a, v(2)).is_some());

    for name in ["duplex-strict", "duplex-last-message"] {
        let sc = builtin_scenario(name).expect("built-in");
        let report = explore(&sc, sc.bounds);
        println!("{name}: {} states, violations {:?}", report.states_visited, report.classes());
    }
}
