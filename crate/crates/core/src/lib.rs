//! Communication mechanisms between concurrent processes, modelled as guarded
//! state machines, and an explorer that enumerates every interleaving of a
//! scenario to find deadlocks, torn reads, lost messages and misrouted
//! messages, or to show that none can happen.
//!
//! A [`Scenario`] declares mechanisms (cells, channels, registers), a bounded
//! program per process, and monitors. The [`Kernel`] steps it one indivisible
//! action at a time; [`explore`] searches all schedules and reports
//! violations with replayable traces.
//!
//! ```
//! use commcheck::{catalog_entry, explore, ViolationKind};
//!
//! let entry = catalog_entry("deadlock-direct-duplex").unwrap();
//! let report = explore(&entry.scenario, entry.scenario.bounds);
//! assert!(report.classes().contains(&ViolationKind::Deadlock));
//! ```
//!
//! Run `cargo run --example <name>` for one example per mechanism; see the
//! `examples/` directory.

pub mod cli;
pub mod explorer;
pub mod kernel;
pub mod mechanisms;
pub mod scenarios;
pub mod value;

pub use explorer::{
    explore, explore_visiting, find_shortest, random_walks, recheck, Bounds, ExplorationReport, Violation,
    ViolationKind,
};
pub use kernel::{replay, ActionLabel, Choice, GlobalState, Kernel, KernelError, Trace, TraceEvent};
pub use mechanisms::MechanismState;
pub use scenarios::catalog::builtin_scenario;
pub use scenarios::{catalog, catalog_entry, load, load_file, CatalogEntry, LoadError, Scenario};
pub use value::{ProcessId, UpdateFn, Value};
