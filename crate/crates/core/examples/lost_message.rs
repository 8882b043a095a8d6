//! A message cell overwrites unread content; a status channel blocks the
//! writer until the reader has taken the previous message.

use commcheck::{builtin_scenario, explore};

fn main() {
    for name in ["lost-message-basic", "status-channel-exact"] {
        let sc = builtin_scenario(name).expect("built-in");
        print!("{}", explore(&sc, sc.bounds));
        println!();
    }
}
