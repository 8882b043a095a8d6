//! The mechanisms on their own. Every operation is a guarded transition:
//! `None` means the step is not enabled, so the caller would block.

use commcheck::mechanisms::{Access, LockMode, LockedCell, MechanismState, StatusChannel};
use commcheck::{ProcessId, UpdateFn, Value};

fn main() {
    let (p0, p1) = (ProcessId(0), ProcessId(1));
    let v = Value::new(vec![1, 2]).expect("two words below 8");

    let ch = StatusChannel::default();
    println!("read on an empty status channel: {:?}", ch.read());
    let full = ch.write(v.clone()).expect("empty accepts");
    println!("second write while full: {:?}", full.write(v.clone()));

    let cell = LockedCell::new(vec![0, 0], LockMode::Encapsulated).lock(p0).expect("free");
    println!("p1 writes a locked encapsulated cell: {:?}", cell.write_word(p1, 0, 5));

    let reg = MechanismState::SharedRegister(commcheck::mechanisms::SharedRegister::new(v));
    let (next, _) = reg.apply(p1, &Access::Update(UpdateFn::Double)).expect("unlocked register");
    println!("double applied per word, mod 8: {reg} -> {next}");
}
