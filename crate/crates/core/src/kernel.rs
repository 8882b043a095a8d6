//! Deterministic stepping engine.
//!
//! The kernel is a set of pure functions over [`GlobalState`]: it lists the
//! indivisible steps enabled in a state and applies one of them, producing a
//! new state. A rendezvous (send matched with receive) is one joint step.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mechanisms::{Access, MechanismState, Outcome, StatusView};
use crate::scenarios::program::{Next, Op, Operand, Pc, WordOperand, END};
use crate::scenarios::Scenario;
use crate::value::{show_msg, Msg, ProcessId, UpdateFn, Value, Word};

/// What a step does, independent of the mechanism it acts on.
///
/// The derived order is the fixed order in which the explorer branches.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionLabel {
    Lock,
    Unlock,
    ReadWord(usize),
    WriteWord(usize, Word),
    Read,
    Write(Msg),
    CheckStatus,
    /// Joint rendezvous step; the receiver is the choice's partner.
    Send(Msg),
    Receive,
    Update(UpdateFn),
    LocalStep,
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Lock => f.write_str("lock"),
            ActionLabel::Unlock => f.write_str("unlock"),
            ActionLabel::ReadWord(i) => write!(f, "read_word[{i}]"),
            ActionLabel::WriteWord(i, w) => write!(f, "write_word[{i}]={w}"),
            ActionLabel::Read => f.write_str("read"),
            ActionLabel::Write(m) => write!(f, "write {}", show_msg(m)),
            ActionLabel::CheckStatus => f.write_str("check"),
            ActionLabel::Send(m) => write!(f, "send {}", show_msg(m)),
            ActionLabel::Receive => f.write_str("receive"),
            ActionLabel::Update(func) => write!(f, "update {func}"),
            ActionLabel::LocalStep => f.write_str("local"),
        }
    }
}

/// One enabled step: who acts, what, on which mechanism (by index), and the
/// receiving partner of a rendezvous.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Choice {
    pub process: ProcessId,
    pub action: ActionLabel,
    pub mechanism: Option<usize>,
    pub partner: Option<ProcessId>,
}

/// Serializable form of a [`Choice`], naming the mechanism by id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub process: ProcessId,
    pub action: ActionLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<ProcessId>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.process, self.action)?;
        if let Some(m) = &self.mechanism {
            write!(f, " on {m}")?;
        }
        if let Some(q) = self.partner {
            write!(f, " to {q}")?;
        }
        Ok(())
    }
}

/// A schedule: the ordered events of one execution.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcessState {
    pub pc: Pc,
    pub locals: Vec<Msg>,
    pub terminated: bool,
}

/// Observer bookkeeping for one mechanism, maintained only where a monitor
/// needs it so that unmonitored scenarios keep their state space small.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ChannelLog {
    pub sent: Vec<Value>,
    pub received: Vec<Value>,
    /// Writer of a message nobody has read yet.
    pub pending: Option<ProcessId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Ghost {
    pub channels: Vec<ChannelLog>,
    /// Words collected so far by word-wise reads, per (process, mechanism).
    pub assembling: BTreeMap<(ProcessId, usize), Vec<Option<Word>>>,
}

/// Snapshot of every mechanism and process; the unit of exploration.
///
/// Vectors are indexed by mechanism and process index, so structurally equal
/// states hash identically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalState {
    pub mechanisms: Vec<MechanismState>,
    pub processes: Vec<ProcessState>,
    pub ghost: Ghost,
}

struct Sha(Sha256);

impl Hasher for Sha {
    fn finish(&self) -> u64 {
        let digest = self.0.clone().finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn write(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }
}

impl GlobalState {
    /// Stable 64-bit digest of the canonical encoding.
    pub fn canonical_hash(&self) -> u64 {
        let mut h = Sha(Sha256::new());
        self.hash(&mut h);
        h.finish()
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.canonical_hash())
    }

    pub fn all_terminated(&self) -> bool {
        self.processes.iter().all(|p| p.terminated)
    }
}

/// Side information produced by a step, consumed by monitors.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Effect {
    /// What a read or receive delivered.
    pub received: Option<Msg>,
    /// A full value assembled from word-wise reads.
    pub assembled: Option<Value>,
    /// Writer of an unread message this step destroyed.
    pub displaced: Option<ProcessId>,
    pub failed_assert: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub choice: Choice,
    pub state: GlobalState,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernelError {
    #[error("{0} is not enabled")]
    NotEnabled(String),
    #[error("event {index} ({event}) is not enabled at its position in the schedule")]
    NotEnabledAtStep { index: usize, event: String },
    #[error("event {index} refers to {what}")]
    UnknownReference { index: usize, what: String },
}

/// Stepping engine bound to one scenario.
#[derive(Clone, Copy)]
pub struct Kernel<'s> {
    scenario: &'s Scenario,
}

impl<'s> Kernel<'s> {
    pub fn new(scenario: &'s Scenario) -> Self {
        Kernel { scenario }
    }

    pub fn scenario(&self) -> &'s Scenario {
        self.scenario
    }

    pub fn initial_state(&self) -> GlobalState {
        let sc = self.scenario;
        GlobalState {
            mechanisms: sc.mechanisms.iter().map(|m| m.initial.clone()).collect(),
            processes: sc
                .processes
                .iter()
                .map(|p| ProcessState {
                    pc: p.program.entry,
                    locals: vec![None; p.program.vars.len()],
                    terminated: p.program.entry == END,
                })
                .collect(),
            ghost: Ghost {
                channels: vec![ChannelLog::default(); sc.mechanisms.len()],
                assembling: BTreeMap::new(),
            },
        }
    }

    /// Every enabled step, sorted by process then action.
    pub fn enabled_actions(&self, state: &GlobalState) -> Vec<Choice> {
        self.successors(state).into_iter().map(|t| t.choice).collect()
    }

    /// Enabled steps together with their resulting states, in branch order.
    pub fn successors(&self, state: &GlobalState) -> Vec<Transition> {
        let mut out = Vec::new();
        for p in 0..state.processes.len() {
            self.successors_of(state, ProcessId(p as u16), &mut out);
        }
        out.sort_by(|a, b| a.choice.cmp(&b.choice));
        out.dedup_by(|a, b| a.choice == b.choice);
        out
    }

    fn successors_of(&self, state: &GlobalState, p: ProcessId, out: &mut Vec<Transition>) {
        let Some(ps) = state.processes.get(p.index()) else { return };
        if ps.terminated {
            return;
        }
        let program = &self.scenario.processes[p.index()].program;
        for pc in program.candidates(ps.pc) {
            let Some((op, _)) = program.action(pc) else { continue };
            match op {
                Op::Send { mech, .. } => {
                    for (qi, qs) in state.processes.iter().enumerate() {
                        let q = ProcessId(qi as u16);
                        if q == p || qs.terminated {
                            continue;
                        }
                        let qprog = &self.scenario.processes[qi].program;
                        for qpc in qprog.candidates(qs.pc) {
                            if matches!(qprog.action(qpc), Some((Op::Receive { mech: m, .. }, _)) if m == mech) {
                                out.extend(self.rendezvous(state, p, pc, q, qpc));
                            }
                        }
                    }
                }
                Op::Receive { .. } => {}
                _ => out.extend(self.fire(state, p, pc)),
            }
        }
    }

    /// Applies an enabled choice; the input state is untouched.
    pub fn step(&self, state: &GlobalState, choice: &Choice) -> Result<GlobalState, KernelError> {
        self.transition(state, choice).map(|t| t.state)
    }

    pub fn transition(&self, state: &GlobalState, choice: &Choice) -> Result<Transition, KernelError> {
        let mut candidates = Vec::new();
        self.successors_of(state, choice.process, &mut candidates);
        candidates
            .into_iter()
            .find(|t| t.choice == *choice)
            .ok_or_else(|| KernelError::NotEnabled(self.describe(choice)))
    }

    /// Replays `trace` from the initial state, failing at the first event
    /// that is not enabled where it occurs.
    pub fn replay(&self, trace: &Trace) -> Result<GlobalState, KernelError> {
        let mut state = self.initial_state();
        for (index, event) in trace.events.iter().enumerate() {
            let choice = self.resolve(index, event)?;
            state = self.step(&state, &choice).map_err(|_| KernelError::NotEnabledAtStep {
                index,
                event: event.to_string(),
            })?;
        }
        Ok(state)
    }

    pub fn resolve(&self, index: usize, event: &TraceEvent) -> Result<Choice, KernelError> {
        let sc = self.scenario;
        let known = |p: ProcessId| p.index() < sc.processes.len();
        if !known(event.process) || event.partner.is_some_and(|q| !known(q)) {
            return Err(KernelError::UnknownReference { index, what: "an undeclared process".into() });
        }
        let mechanism = match &event.mechanism {
            None => None,
            Some(name) => Some(sc.mechanism_index(name).ok_or_else(|| KernelError::UnknownReference {
                index,
                what: format!("unknown mechanism \"{name}\""),
            })?),
        };
        Ok(Choice { process: event.process, action: event.action.clone(), mechanism, partner: event.partner })
    }

    pub fn to_event(&self, choice: &Choice) -> TraceEvent {
        TraceEvent {
            process: choice.process,
            action: choice.action.clone(),
            mechanism: choice.mechanism.map(|m| match self.scenario.mechanisms.get(m) {
                Some(decl) => decl.id.clone(),
                None => format!("#{m}"),
            }),
            partner: choice.partner,
        }
    }

    pub fn to_trace<'c>(&self, choices: impl IntoIterator<Item = &'c Choice>) -> Trace {
        Trace { events: choices.into_iter().map(|c| self.to_event(c)).collect() }
    }

    pub fn describe(&self, choice: &Choice) -> String {
        self.to_event(choice).to_string()
    }

    fn eval(locals: &[Msg], operand: &Operand) -> Msg {
        match operand {
            Operand::Lit(v) => Some(v.clone()),
            Operand::Var(i) => locals[*i].clone(),
            Operand::Empty => None,
        }
    }

    fn advance(ps: &mut ProcessState, next: &Next, status: Option<StatusView>, word: Option<Word>) {
        ps.pc = match next {
            Next::Goto(pc) => *pc,
            Next::IfReadable { then, otherwise } => {
                if status == Some(StatusView::Readable) {
                    *then
                } else {
                    *otherwise
                }
            }
            Next::IfWord { word: expected, then, otherwise } => {
                if word == Some(*expected) {
                    *then
                } else {
                    *otherwise
                }
            }
        };
        ps.terminated = ps.pc == END;
    }

    /// Fires the single-process action at `pc`, if enabled.
    fn fire(&self, state: &GlobalState, p: ProcessId, pc: Pc) -> Option<Transition> {
        let program = &self.scenario.processes[p.index()].program;
        let (op, next) = program.action(pc)?;
        let locals = &state.processes[p.index()].locals;
        let mut effect = Effect::default();

        // Steps that touch only the process.
        let local_result = match op {
            Op::Local { var, value } => Some((*var, Self::eval(locals, value))),
            Op::Compute { var, function } => Some((*var, Some(function.apply(locals[*var].as_ref()?)))),
            Op::AssertLocal { var, expected } => {
                if locals[*var] != *expected {
                    let name = &program.vars[*var];
                    effect.failed_assert = Some(format!("{p}.{name} = {}", show_msg(&locals[*var])));
                }
                None
            }
            Op::Skip => None,
            _ => {
                return self.fire_mechanism(state, p, op, next);
            }
        };
        let mut next_state = state.clone();
        let ps = &mut next_state.processes[p.index()];
        if let Some((var, value)) = local_result {
            ps.locals[var] = value;
        }
        Self::advance(ps, next, None, None);
        let choice = Choice { process: p, action: ActionLabel::LocalStep, mechanism: None, partner: None };
        Some(Transition { choice, state: next_state, effect })
    }

    fn fire_mechanism(&self, state: &GlobalState, p: ProcessId, op: &Op, next: &Next) -> Option<Transition> {
        let locals = &state.processes[p.index()].locals;
        let mech = op.mechanism().expect("mechanism op");
        let (access, label) = match op {
            Op::Write { value, .. } => {
                let msg = Self::eval(locals, value);
                (Access::Write(msg.clone()), ActionLabel::Write(msg))
            }
            Op::Read { .. } => (Access::Read, ActionLabel::Read),
            Op::Lock { .. } => (Access::Lock, ActionLabel::Lock),
            Op::Unlock { .. } => (Access::Unlock, ActionLabel::Unlock),
            Op::ReadWord { index, .. } => (Access::ReadWord(*index), ActionLabel::ReadWord(*index)),
            Op::WriteWord { index, word, .. } => {
                let w = match word {
                    WordOperand::Lit(w) => *w,
                    WordOperand::Var(v) => locals[*v].as_ref()?.word(*index),
                };
                (Access::WriteWord(*index, w), ActionLabel::WriteWord(*index, w))
            }
            Op::Check { .. } => (Access::Check, ActionLabel::CheckStatus),
            Op::Update { function, .. } => (Access::Update(*function), ActionLabel::Update(*function)),
            _ => unreachable!("local and rendezvous ops are handled elsewhere"),
        };
        let (mech_state, outcome) = state.mechanisms[mech].apply(p, &access)?;

        let mut next_state = state.clone();
        next_state.mechanisms[mech] = mech_state;
        let mut effect = Effect::default();
        let plan = &self.scenario.ghost;
        let (mut status, mut word) = (None, None);

        match (op, outcome) {
            (Op::Read { bind, .. }, Outcome::Msg(msg)) => {
                next_state.processes[p.index()].locals[*bind] = msg.clone();
                let log = &mut next_state.ghost.channels[mech];
                if plan.log[mech] {
                    if let Some(v) = &msg {
                        log.received.push(v.clone());
                    }
                }
                if plan.pending[mech] {
                    log.pending = None;
                }
                effect.received = Some(msg);
            }
            (Op::Write { .. } | Op::Update { .. }, _) => {
                let log = &mut next_state.ghost.channels[mech];
                if plan.log[mech] {
                    if let ActionLabel::Write(Some(v)) = &label {
                        log.sent.push(v.clone());
                    }
                }
                if plan.pending[mech] {
                    if matches!(op, Op::Write { .. }) {
                        effect.displaced = log.pending;
                    }
                    log.pending = Some(p);
                }
            }
            (Op::ReadWord { index, bind, .. }, Outcome::Word(w)) => {
                word = Some(w);
                if let Some(var) = bind {
                    let slot = &mut next_state.processes[p.index()].locals[*var];
                    let base = slot.clone().unwrap_or_else(|| Value::zero(self.scenario.word_width));
                    *slot = Some(base.with_word(*index, w));
                }
                if plan.assemble[mech] {
                    let width = self.scenario.word_width;
                    let buf = next_state.ghost.assembling.entry((p, mech)).or_insert_with(|| vec![None; width]);
                    buf[*index] = Some(w);
                    if buf.iter().all(Option::is_some) {
                        let words = buf.iter().map(|w| w.expect("filled")).collect();
                        next_state.ghost.assembling.remove(&(p, mech));
                        effect.assembled = Value::new(words);
                    }
                }
            }
            (Op::Check { bind, .. }, Outcome::Status(s)) => {
                status = Some(s);
                if let Some(var) = bind {
                    let code = Value::zero(self.scenario.word_width).with_word(0, s.code());
                    next_state.processes[p.index()].locals[*var] = Some(code);
                }
            }
            _ => {}
        }

        Self::advance(&mut next_state.processes[p.index()], next, status, word);
        let choice = Choice { process: p, action: label, mechanism: Some(mech), partner: None };
        Some(Transition { choice, state: next_state, effect })
    }

    fn rendezvous(&self, state: &GlobalState, p: ProcessId, pc: Pc, q: ProcessId, qpc: Pc) -> Option<Transition> {
        let sc = self.scenario;
        let (Op::Send { mech, value }, next) = sc.processes[p.index()].program.action(pc)? else {
            return None;
        };
        let (Op::Receive { bind, .. }, qnext) = sc.processes[q.index()].program.action(qpc)? else {
            return None;
        };
        let msg = Self::eval(&state.processes[p.index()].locals, value);
        let mut next_state = state.clone();
        next_state.processes[q.index()].locals[*bind] = msg.clone();
        if sc.ghost.log[*mech] {
            if let Some(v) = &msg {
                let log = &mut next_state.ghost.channels[*mech];
                log.sent.push(v.clone());
                log.received.push(v.clone());
            }
        }
        Self::advance(&mut next_state.processes[p.index()], next, None, None);
        Self::advance(&mut next_state.processes[q.index()], qnext, None, None);
        let effect = Effect { received: Some(msg.clone()), ..Effect::default() };
        let choice = Choice { process: p, action: ActionLabel::Send(msg), mechanism: Some(*mech), partner: Some(q) };
        Some(Transition { choice, state: next_state, effect })
    }
}

/// Replays `schedule` on `scenario`; see [`Kernel::replay`].
pub fn replay(scenario: &Scenario, schedule: &Trace) -> Result<GlobalState, KernelError> {
    Kernel::new(scenario).replay(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::load;

    fn scenario(mechanisms: &str, processes: &str) -> Scenario {
        let doc = format!("(name: \"t\", mechanisms: [{mechanisms}], processes: [{processes}])");
        load(&doc).unwrap_or_else(|e| panic!("{e}"))
    }

    fn status_pair() -> Scenario {
        scenario(
            r#"(id: "c", kind: "status_channel")"#,
            r#"(id: 0, program: [Write(mech: "c", value: Lit([1, 2]))]),
               (id: 1, program: [Read(mech: "c", bind: "v")])"#,
        )
    }

    #[test]
    fn read_on_empty_status_channel_is_absent() {
        let sc = status_pair();
        let k = Kernel::new(&sc);
        let init = k.initial_state();
        let enabled = k.enabled_actions(&init);
        assert_eq!(enabled.len(), 1);
        assert_eq!(enabled[0].process, ProcessId(0));
        let read = Choice { process: ProcessId(1), action: ActionLabel::Read, mechanism: Some(0), partner: None };
        assert!(matches!(k.step(&init, &read), Err(KernelError::NotEnabled(_))));
        let nowhere = Choice { mechanism: Some(7), ..read };
        assert!(matches!(k.step(&init, &nowhere), Err(KernelError::NotEnabled(_))));
    }

    #[test]
    fn write_then_read_moves_the_message() {
        let sc = status_pair();
        let k = Kernel::new(&sc);
        let init = k.initial_state();
        let write = k.enabled_actions(&init).remove(0);
        let s1 = k.step(&init, &write).unwrap();
        assert_eq!(s1.processes[0].pc, END);
        assert!(s1.processes[0].terminated);
        let read = k.enabled_actions(&s1).remove(0);
        assert_eq!(read.action, ActionLabel::Read);
        let s2 = k.step(&s1, &read).unwrap();
        assert_eq!(s2.processes[1].locals[0], Value::new(vec![1, 2]));
        assert!(s2.all_terminated());
        assert!(k.enabled_actions(&s2).is_empty());
        // Inputs are never mutated.
        assert_eq!(init, k.initial_state());
    }

    #[test]
    fn rendezvous_is_one_joint_step() {
        let sc = scenario(
            r#"(id: "d", kind: "direct_channel")"#,
            r#"(id: 0, program: [Send(mech: "d", value: Lit([3, 3]))]),
               (id: 1, program: [Receive(mech: "d", bind: "v")])"#,
        );
        let k = Kernel::new(&sc);
        let init = k.initial_state();
        let enabled = k.enabled_actions(&init);
        assert_eq!(enabled.len(), 1);
        assert_eq!(enabled[0].partner, Some(ProcessId(1)));
        let s = k.step(&init, &enabled[0]).unwrap();
        assert!(s.all_terminated());
        assert_eq!(s.processes[1].locals[0], Value::new(vec![3, 3]));
    }

    #[test]
    fn encapsulated_lock_excludes_other_processes() {
        let sc = scenario(
            r#"(id: "x", kind: "locked_cell", mode: "encapsulated")"#,
            r#"(id: 0, program: [Lock(mech: "x"), WriteWord(mech: "x", index: 0, word: Lit(1)), Unlock(mech: "x")]),
               (id: 1, program: [Lock(mech: "x"), ReadWord(mech: "x", index: 0), Unlock(mech: "x")])"#,
        );
        let k = Kernel::new(&sc);
        let init = k.initial_state();
        assert_eq!(k.enabled_actions(&init).len(), 2);
        let lock0 = k.enabled_actions(&init).remove(0);
        let s = k.step(&init, &lock0).unwrap();
        let enabled = k.enabled_actions(&s);
        assert_eq!(enabled.len(), 1);
        assert_eq!(enabled[0].process, ProcessId(0));
    }

    #[test]
    fn replay_reports_stale_and_unknown_events() {
        let sc = status_pair();
        let k = Kernel::new(&sc);
        let read = TraceEvent { process: ProcessId(1), action: ActionLabel::Read, mechanism: Some("c".into()), partner: None };
        let stale = Trace { events: vec![read.clone()] };
        assert!(matches!(k.replay(&stale), Err(KernelError::NotEnabledAtStep { index: 0, .. })));
        let unknown = Trace { events: vec![TraceEvent { mechanism: Some("zz".into()), ..read.clone() }] };
        assert!(matches!(k.replay(&unknown), Err(KernelError::UnknownReference { index: 0, .. })));
        let ghost = Trace { events: vec![TraceEvent { process: ProcessId(9), ..read }] };
        assert!(matches!(k.replay(&ghost), Err(KernelError::UnknownReference { .. })));
    }

    #[test]
    fn replay_round_trips_through_events() {
        let sc = status_pair();
        let k = Kernel::new(&sc);
        let mut state = k.initial_state();
        let mut path = Vec::new();
        while let Some(c) = k.enabled_actions(&state).into_iter().next() {
            state = k.step(&state, &c).unwrap();
            path.push(c);
        }
        let trace = k.to_trace(&path);
        assert_eq!(k.replay(&trace).unwrap(), state);
        assert_eq!(replay(&sc, &trace).unwrap().hash_hex(), state.hash_hex());
    }

    #[test]
    fn hash_is_structural() {
        let sc = status_pair();
        let k = Kernel::new(&sc);
        let a = k.initial_state();
        let b = k.initial_state();
        assert_eq!(a.canonical_hash(), b.canonical_hash());
        assert_eq!(a.hash_hex().len(), 16);
        let moved = k.step(&a, &k.enabled_actions(&a)[0]).unwrap();
        assert_ne!(a.canonical_hash(), moved.canonical_hash());
    }
}
