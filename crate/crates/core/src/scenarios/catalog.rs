//! Built-in scenarios, each with the outcome exploration must produce.

use std::collections::BTreeSet;
use std::fmt;

use crate::explorer::{explore, explore_visiting, ExplorationReport, ViolationKind};
use crate::kernel::GlobalState;
use crate::value::{show_msg, Msg};

use super::{load, Scenario};

/// What exploring a catalog scenario must report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expectation {
    /// Exactly these violation classes, no more, no fewer.
    pub violations: BTreeSet<ViolationKind>,
    /// Exploration must finish without hitting a bound.
    pub complete: bool,
    /// Over all terminal states, word 0 of this register spans exactly `min..=max`.
    pub terminal_word: Option<TerminalWord>,
    /// The process whose variables (in declaration order) must observe the same
    /// set of value tuples in this scenario and in the companion.
    pub observer: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminalWord {
    pub mechanism: &'static str,
    pub min: u8,
    pub max: u8,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub scenario: Scenario,
    /// Second scenario for equivalence checks.
    pub companion: Option<Scenario>,
    pub expectation: Expectation,
}

/// Result of checking one entry against its expectation.
#[derive(Clone, Debug)]
pub struct EntryCheck {
    pub name: String,
    pub passed: bool,
    pub report: ExplorationReport,
    /// One line per expectation, prefixed with ok/FAIL.
    pub notes: Vec<String>,
}

impl fmt::Display for EntryCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{verdict:<4}  {:<30} {}", self.name, self.notes.join("; "))
    }
}

const DOCUMENTS: [(&str, &str); 15] = [
    ("torn-read-raw", include_str!("../../catalog/torn-read-raw.ron")),
    ("torn-read-locked", include_str!("../../catalog/torn-read-locked.ron")),
    ("undisciplined-third-party", include_str!("../../catalog/undisciplined-third-party.ron")),
    ("lost-message-basic", include_str!("../../catalog/lost-message-basic.ron")),
    ("status-channel-exact", include_str!("../../catalog/status-channel-exact.ron")),
    ("deadlock-direct-duplex", include_str!("../../catalog/deadlock-direct-duplex.ron")),
    ("deadlock-fixed-indirect", include_str!("../../catalog/deadlock-fixed-indirect.ron")),
    ("duplex-strict", include_str!("../../catalog/duplex-strict.ron")),
    ("duplex-last-message", include_str!("../../catalog/duplex-last-message.ron")),
    ("last-message-unidirectional", include_str!("../../catalog/last-message-unidirectional.ron")),
    ("register-atomic-update", include_str!("../../catalog/register-atomic-update.ron")),
    ("register-lost-update", include_str!("../../catalog/register-lost-update.ron")),
    ("dekker-mutex", include_str!("../../catalog/dekker-mutex.ron")),
    ("decomposition-equivalence", include_str!("../../catalog/decomposition-equivalence.ron")),
    ("decomposition-relay", include_str!("../../catalog/decomposition-relay.ron")),
];

/// Raw document text of a built-in scenario, including the relay companion.
pub fn document(name: &str) -> Option<&'static str> {
    DOCUMENTS.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
}

fn builtin(name: &str) -> Scenario {
    let doc = document(name).unwrap_or_else(|| panic!("no built-in document {name}"));
    load(doc).unwrap_or_else(|e| panic!("built-in scenario {name} does not load: {e}"))
}

fn expect(classes: &[ViolationKind]) -> Expectation {
    Expectation { violations: classes.iter().cloned().collect(), complete: true, terminal_word: None, observer: None }
}

/// The fourteen built-in scenarios, in catalog order.
pub fn catalog() -> Vec<CatalogEntry> {
    use ViolationKind::*;
    let entry = |name: &str, expectation: Expectation| CatalogEntry {
        scenario: builtin(name),
        companion: None,
        expectation,
    };
    vec![
        entry("torn-read-raw", expect(&[TornRead])),
        entry("torn-read-locked", expect(&[])),
        entry("undisciplined-third-party", expect(&[TornRead])),
        entry("lost-message-basic", expect(&[LostMessage])),
        entry("status-channel-exact", expect(&[])),
        entry("deadlock-direct-duplex", expect(&[Deadlock])),
        entry("deadlock-fixed-indirect", expect(&[])),
        entry("duplex-strict", expect(&[])),
        entry("duplex-last-message", expect(&[LostMessage])),
        entry("last-message-unidirectional", expect(&[])),
        entry(
            "register-atomic-update",
            Expectation {
                terminal_word: Some(TerminalWord { mechanism: "r", min: 6, max: 6 }),
                ..expect(&[])
            },
        ),
        entry(
            "register-lost-update",
            Expectation {
                terminal_word: Some(TerminalWord { mechanism: "r", min: 2, max: 6 }),
                ..expect(&[])
            },
        ),
        entry("dekker-mutex", expect(&[])),
        CatalogEntry {
            scenario: builtin("decomposition-equivalence"),
            companion: Some(builtin("decomposition-relay")),
            expectation: Expectation { observer: Some(1), ..expect(&[]) },
        },
    ]
}

pub fn catalog_entry(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.scenario.name == name)
}

/// Resolves a catalog name to its scenario; also accepts the relay companion.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    document(name).map(|_| builtin(name))
}

/// Explores `scenario` and returns every distinct tuple of `process`'s local
/// variables over its terminal states.
pub fn observations(scenario: &Scenario, process: usize) -> (ExplorationReport, BTreeSet<Vec<Msg>>) {
    let mut seen = BTreeSet::new();
    let report = explore_visiting(scenario, scenario.bounds, |s: &GlobalState| {
        seen.insert(s.processes[process].locals.clone());
    });
    (report, seen)
}

fn terminal_words(scenario: &Scenario, mech: usize) -> (ExplorationReport, BTreeSet<u8>) {
    let mut seen = BTreeSet::new();
    let report = explore_visiting(scenario, scenario.bounds, |s: &GlobalState| {
        if let crate::mechanisms::MechanismState::SharedRegister(r) = &s.mechanisms[mech] {
            seen.insert(r.content.word(0));
        }
    });
    (report, seen)
}

impl CatalogEntry {
    pub fn name(&self) -> &str {
        &self.scenario.name
    }

    /// Explores the scenario (and companion) with its own bounds and compares
    /// the result against the expectation.
    pub fn check(&self) -> EntryCheck {
        let exp = &self.expectation;
        let mut notes = Vec::new();
        let mut passed = true;
        let mut note = |ok: bool, text: String| {
            passed &= ok;
            notes.push(format!("{} {text}", if ok { "ok" } else { "FAIL" }));
        };

        let report = match (&exp.terminal_word, exp.observer) {
            (Some(tw), _) => {
                let mech = self.scenario.mechanism_index(tw.mechanism).expect("expectation names a mechanism");
                let (report, words) = terminal_words(&self.scenario, mech);
                let lo = words.first().copied();
                let hi = words.last().copied();
                note(
                    lo == Some(tw.min) && hi == Some(tw.max),
                    format!("terminal {} in {:?}..={:?} (want {}..={})", tw.mechanism, lo, hi, tw.min, tw.max),
                );
                report
            }
            (None, Some(process)) => {
                let (report, mine) = observations(&self.scenario, process);
                match &self.companion {
                    Some(other) => {
                        let (other_report, theirs) = observations(other, process);
                        let mut text = format!("{} observation sequences, companion {}", mine.len(), theirs.len());
                        if mine != theirs {
                            let diff: Vec<String> = mine.symmetric_difference(&theirs).take(3).map(|t| show_tuple(t)).collect();
                            text.push_str(&format!(", differ on {}", diff.join(" ")));
                        }
                        note(mine == theirs && !other_report.bounds_hit, text);
                    }
                    None => note(false, "no companion scenario".into()),
                }
                report
            }
            (None, None) => explore(&self.scenario, self.scenario.bounds),
        };

        let classes = report.classes();
        let shown = |set: &BTreeSet<ViolationKind>| {
            if set.is_empty() {
                "none".to_string()
            } else {
                set.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
            }
        };
        note(
            classes == exp.violations,
            format!("violations {} (want {})", shown(&classes), shown(&exp.violations)),
        );
        if exp.complete {
            note(!report.bounds_hit, format!("complete after {} states", report.states_visited));
        }
        EntryCheck { name: self.scenario.name.clone(), passed, report, notes }
    }
}

pub(crate) fn show_tuple(values: &[Msg]) -> String {
    format!("({})", values.iter().map(show_msg).collect::<Vec<_>>().join(" "))
}
