//! A message cell behaves like a relay process between two rendezvous
//! channels: the reader observes the same set of value sequences in both.

use commcheck::builtin_scenario;
use commcheck::scenarios::catalog::observations;

fn main() {
    let cell = builtin_scenario("decomposition-equivalence").expect("built-in");
    let relay = builtin_scenario("decomposition-relay").expect("built-in");
    let reader = cell.process_by_name("reader").expect("reader").index();
    let (_, via_cell) = observations(&cell, reader);
    let (_, via_relay) = observations(&relay, reader);
    println!("message cell: {} observation sequences", via_cell.len());
    println!("relay:        {} observation sequences", via_relay.len());
    println!("equal: {}", via_cell == via_relay);
    for seq in via_cell.iter().take(5) {
        let shown: Vec<String> = seq.iter().map(commcheck::value::show_msg).collect();
        println!("  {}", shown.join(" "));
    }
}
