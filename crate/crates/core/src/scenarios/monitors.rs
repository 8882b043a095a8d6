//! Monitors turn failure modes into checkable predicates over steps and
//! states. Evaluation never modifies the state it inspects.

use std::collections::BTreeSet;

use crate::explorer::ViolationKind;
use crate::kernel::{ActionLabel, Choice, Effect, GlobalState};
use crate::mechanisms::MechanismState;
use crate::value::{show_msg, Msg, ProcessId, Value};

use super::format::MonitorDoc;
use super::{expected_msg, program, GhostPlan, ProcessDecl, Scenario};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Monitor {
    MutualExclusion { section: usize, name: String },
    SentReceivedOrder { mech: usize, name: String },
    Subsequence { mech: usize, name: String },
    TornValue { mech: usize, allowed: BTreeSet<Value> },
    RecipientTag { mech: usize },
    TerminalAssert { process: ProcessId, var: usize, expected: Msg, label: String },
    LostUnread { mech: usize, name: String, duplex: bool },
}

/// A monitor hit: the violation class plus a human-readable explanation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub kind: ViolationKind,
    pub detail: String,
}

fn message_carrier(state: &MechanismState) -> bool {
    !matches!(state, MechanismState::RawCell(_) | MechanismState::LockedCell(_))
}

pub(crate) fn compile(
    doc: &MonitorDoc,
    mechanisms: &[(String, MechanismState)],
    processes: &[ProcessDecl],
    sections: &[String],
    width: usize,
) -> Result<Monitor, String> {
    let mech = |name: &str| {
        mechanisms
            .iter()
            .position(|(id, _)| id == name)
            .map(|i| (i, &mechanisms[i].1))
            .ok_or_else(|| format!("unknown mechanism \"{name}\""))
    };
    Ok(match doc {
        MonitorDoc::MutualExclusion { section } => {
            let index = sections
                .iter()
                .position(|s| s == section)
                .ok_or_else(|| format!("no critical section named \"{section}\""))?;
            Monitor::MutualExclusion { section: index, name: section.clone() }
        }
        MonitorDoc::SentReceivedOrder { mech: name } | MonitorDoc::Subsequence { mech: name } => {
            let (i, state) = mech(name)?;
            if !message_carrier(state) {
                return Err(format!("\"{name}\" does not carry messages"));
            }
            match doc {
                MonitorDoc::SentReceivedOrder { .. } => Monitor::SentReceivedOrder { mech: i, name: name.clone() },
                _ => Monitor::Subsequence { mech: i, name: name.clone() },
            }
        }
        MonitorDoc::TornValue { mech: name, values } => {
            let (i, state) = mech(name)?;
            let initial = match state {
                MechanismState::RawCell(c) => c.words.clone(),
                MechanismState::LockedCell(c) => c.words.clone(),
                _ => return Err(format!("\"{name}\" is not a word-divisible cell")),
            };
            let mut allowed = BTreeSet::new();
            allowed.insert(Value::new(initial).expect("validated"));
            for v in values {
                allowed.insert(program::literal(v, width)?);
            }
            Monitor::TornValue { mech: i, allowed }
        }
        MonitorDoc::RecipientTag { mech: name } => {
            let (i, state) = mech(name)?;
            if !matches!(state, MechanismState::DuplexChannel(_)) {
                return Err(format!("\"{name}\" is not a duplex channel"));
            }
            Monitor::RecipientTag { mech: i }
        }
        MonitorDoc::TerminalAssert { process, var, expected } => {
            let decl = processes.get(*process as usize).ok_or_else(|| format!("unknown process p{process}"))?;
            let slot = decl.program.var(var).ok_or_else(|| format!("p{process} has no variable \"{var}\""))?;
            Monitor::TerminalAssert {
                process: decl.id,
                var: slot,
                expected: expected_msg(expected, width)?,
                label: format!("p{process}.{var}"),
            }
        }
        MonitorDoc::LostUnread { mech: name } => {
            let (i, state) = mech(name)?;
            if !message_carrier(state) || matches!(state, MechanismState::DirectChannel) {
                return Err(format!("\"{name}\" does not store messages"));
            }
            let duplex = matches!(state, MechanismState::DuplexChannel(_));
            Monitor::LostUnread { mech: i, name: name.clone(), duplex }
        }
    })
}

impl Monitor {
    pub(crate) fn plan(&self, ghost: &mut GhostPlan) {
        match self {
            Monitor::SentReceivedOrder { mech, .. } | Monitor::Subsequence { mech, .. } => ghost.log[*mech] = true,
            Monitor::TornValue { mech, .. } => ghost.assemble[*mech] = true,
            Monitor::RecipientTag { mech } | Monitor::LostUnread { mech, .. } => ghost.pending[*mech] = true,
            Monitor::MutualExclusion { .. } | Monitor::TerminalAssert { .. } => {}
        }
    }
}

fn is_subsequence(sub: &[Value], of: &[Value]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|x| it.any(|y| y == x))
}

/// Findings caused by the step itself (what it read, what it overwrote).
pub fn on_transition(
    scenario: &Scenario,
    pre: &GlobalState,
    choice: &Choice,
    effect: &Effect,
    _post: &GlobalState,
) -> Vec<Finding> {
    let mut out = Vec::new();
    if let Some(what) = &effect.failed_assert {
        out.push(Finding {
            kind: ViolationKind::MonitorAssert(format!("assert-local:{}", choice.process)),
            detail: format!("assertion failed: {what}"),
        });
    }
    let Some(mech) = choice.mechanism else { return out };
    let is_read = choice.action == ActionLabel::Read;
    let is_write = matches!(choice.action, ActionLabel::Write(_));
    for monitor in &scenario.monitors {
        match monitor {
            Monitor::TornValue { mech: m, allowed } if *m == mech => {
                if let Some(v) = &effect.assembled {
                    if !allowed.contains(v) {
                        out.push(Finding {
                            kind: ViolationKind::TornRead,
                            detail: format!("{} assembled {v} from \"{}\"", choice.process, scenario.mechanisms[mech].id),
                        });
                    }
                }
            }
            Monitor::RecipientTag { mech: m } if *m == mech && is_read => {
                if pre.ghost.channels[mech].pending == Some(choice.process) {
                    out.push(Finding {
                        kind: ViolationKind::WrongRecipient,
                        detail: format!("{} read back its own message", choice.process),
                    });
                }
            }
            Monitor::LostUnread { mech: m, name, duplex } if *m == mech && is_write => {
                if let Some(writer) = effect.displaced {
                    if *duplex && writer != choice.process {
                        out.push(Finding {
                            kind: ViolationKind::MonitorAssert(format!("incoming-overwritten:{name}")),
                            detail: format!("{} overwrote an unread message from {writer}", choice.process),
                        });
                    } else {
                        out.push(Finding {
                            kind: ViolationKind::LostMessage,
                            detail: format!("{} overwrote an unread message from {writer} on \"{name}\"", choice.process),
                        });
                    }
                }
            }
            Monitor::Subsequence { mech: m, name } if *m == mech && is_read => {
                if let Some(Some(got)) = &effect.received {
                    let latest = pre.ghost.channels[mech].sent.last();
                    if latest != Some(got) {
                        out.push(Finding {
                            kind: ViolationKind::MonitorAssert(format!("subsequence:{name}")),
                            detail: format!("read {got} but the latest write was {}", show_msg(&latest.cloned())),
                        });
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Findings about a state on its own; terminal checks apply once every
/// process has terminated.
pub fn on_state(scenario: &Scenario, state: &GlobalState) -> Vec<Finding> {
    let mut out = Vec::new();
    let terminal = state.all_terminated();
    for monitor in &scenario.monitors {
        match monitor {
            Monitor::MutualExclusion { section, name } => {
                let inside: Vec<String> = scenario
                    .processes
                    .iter()
                    .zip(&state.processes)
                    .filter(|(decl, ps)| decl.program.section_at(ps.pc) == Some(*section))
                    .map(|(decl, _)| decl.id.to_string())
                    .collect();
                if inside.len() > 1 {
                    out.push(Finding {
                        kind: ViolationKind::MonitorAssert(format!("mutual-exclusion:{name}")),
                        detail: format!("{} are all inside \"{name}\"", inside.join(", ")),
                    });
                }
            }
            Monitor::SentReceivedOrder { mech, name } => {
                let log = &state.ghost.channels[*mech];
                let prefix = log.received.len() <= log.sent.len() && log.sent.starts_with(&log.received);
                if !prefix || (terminal && log.received.len() != log.sent.len()) {
                    out.push(Finding {
                        kind: ViolationKind::MonitorAssert(format!("sent-received-order:{name}")),
                        detail: format!(
                            "received {} but sent {}",
                            show_seq(&log.received),
                            show_seq(&log.sent)
                        ),
                    });
                }
            }
            Monitor::Subsequence { mech, name } => {
                let log = &state.ghost.channels[*mech];
                if !is_subsequence(&log.received, &log.sent) {
                    out.push(Finding {
                        kind: ViolationKind::MonitorAssert(format!("subsequence:{name}")),
                        detail: format!("received {} is not a subsequence of {}", show_seq(&log.received), show_seq(&log.sent)),
                    });
                }
            }
            Monitor::TerminalAssert { process, var, expected, label } if terminal => {
                let actual = &state.processes[process.index()].locals[*var];
                if actual != expected {
                    out.push(Finding {
                        kind: ViolationKind::MonitorAssert(format!("terminal-assert:{label}")),
                        detail: format!("{label} = {}, expected {}", show_msg(actual), show_msg(expected)),
                    });
                }
            }
            _ => {}
        }
    }
    out
}

fn show_seq(values: &[Value]) -> String {
    format!("[{}]", values.iter().map(Value::to_string).collect::<Vec<_>>().join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsequence_check() {
        let v = |w: u8| Value::new(vec![w]).unwrap();
        assert!(is_subsequence(&[v(1), v(3)], &[v(1), v(2), v(3)]));
        assert!(is_subsequence(&[], &[v(1)]));
        assert!(!is_subsequence(&[v(3), v(1)], &[v(1), v(2), v(3)]));
        assert!(!is_subsequence(&[v(1), v(1)], &[v(1), v(2)]));
    }
}
