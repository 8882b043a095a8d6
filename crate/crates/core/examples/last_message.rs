//! A last-message channel never blocks the writer; the reader sees some
//! subsequence of what was written, always including the final value once
//! it reads after the writer is done.

use commcheck::mechanisms::LastMessageChannel;
use commcheck::{builtin_scenario, explore, Value};

fn main() {
    let mut ch = LastMessageChannel::default();
    for w in 1..=3 {
        ch = ch.write(Value::new(vec![w, w]).expect("valid"));
    }
    let (ch, got) = ch.read().expect("a message is waiting");
    println!("three writes, one read: got {got}; second read possible: {}", ch.read().is_some());

    let sc = builtin_scenario("last-message-unidirectional").expect("built-in");
    print!("{}", explore(&sc, sc.bounds));
}
