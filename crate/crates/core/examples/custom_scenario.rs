//! Writing a scenario by hand: a producer and a consumer sharing a status
//! channel, where the consumer checks the status before reading.

use commcheck::{explore, load, random_walks};

const DOC: &str = r#"(
    name: "check-then-read",
    mechanisms: [(id: "c", kind: "status_channel")],
    processes: [
        (id: 0, name: "producer", program: [
            Write(mech: "c", value: Lit([1, 2])),
        ]),
        (id: 1, name: "consumer", program: [
            IfStatus(mech: "c",
                full: [Read(mech: "c", bind: "got")],
                empty: [Local(var: "got", value: Empty)]),
        ]),
    ],
    monitors: [TerminalAssert(process: 1, var: "got", expected: Lit([1, 2]))],
)"#;

fn main() {
    let sc = match load(DOC) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    };
    let report = explore(&sc, sc.bounds);
    print!("{report}");
    let walks = random_walks(&sc, 1_000, sc.bounds.max_depth, 1);
    println!("1000 random schedules found {:?}", walks.classes());

    // Errors point at the offending part of the document.
    let bad = DOC.replace("Read(mech: \"c\"", "Read(mech: \"d\"");
    if let Err(e) = load(&bad) {
        println!("\n{e}");
    }
}
