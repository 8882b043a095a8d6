//! Exhaustive interleaving exploration.
//!
//! [`explore`] runs a depth-first search over every interleaving, memoizing
//! visited states by their canonical form. [`find_shortest`] is the
//! breadth-first variant that returns a minimum-length counterexample, and
//! [`random_walks`] samples schedules uniformly for cross-checking.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::kernel::{Choice, GlobalState, Kernel, KernelError, Trace, Transition};
use crate::scenarios::monitors::{self, Finding};
use crate::scenarios::{to_ron, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    /// Longest schedule explored.
    pub max_depth: usize,
    /// Most distinct states stored.
    pub max_states: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { max_depth: 200, max_states: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    /// Some process is unterminated and nothing is enabled.
    Deadlock,
    /// A word-wise read assembled a value no single write produced.
    TornRead,
    /// A write destroyed a message nobody had read.
    LostMessage,
    /// A side read a message not intended for it.
    WrongRecipient,
    /// A named monitor or program assertion failed.
    MonitorAssert(String),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::MonitorAssert(name) => write!(f, "MonitorAssert({name})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// One violation class with a representative counterexample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
    /// How many distinct states or steps exhibited this class.
    pub occurrences: u64,
    pub state_hash: String,
    pub trace: Trace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub scenario: String,
    pub states_visited: u64,
    pub distinct_terminal_states: u64,
    pub deadlock_states: u64,
    /// Number of maximal schedules; `None` when the state graph has a cycle or
    /// a bound was hit.
    pub schedules_complete: Option<u64>,
    pub bounds_hit: bool,
    /// One entry per violation class, ordered by class.
    pub violations: Vec<Violation>,
}

impl ExplorationReport {
    pub fn classes(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind.clone()).collect()
    }

    pub fn violation(&self, kind: &ViolationKind) -> Option<&Violation> {
        self.violations.iter().find(|v| v.kind == *kind)
    }

    pub fn to_document(&self) -> String {
        to_ron(self)
    }

    pub fn from_document(text: &str) -> Result<Self, ron::error::SpannedError> {
        crate::scenarios::from_ron(text)
    }
}

impl fmt::Display for ExplorationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f, "states visited: {}", self.states_visited)?;
        writeln!(f, "terminal states: {}", self.distinct_terminal_states)?;
        writeln!(f, "deadlocked states: {}", self.deadlock_states)?;
        match self.schedules_complete {
            Some(n) => writeln!(f, "complete schedules: {n}")?,
            None => writeln!(f, "complete schedules: unknown")?,
        }
        writeln!(f, "bounds hit: {}", self.bounds_hit)?;
        if self.violations.is_empty() {
            return writeln!(f, "violations: none");
        }
        writeln!(f, "violations: {}", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {} x{}: {}", v.kind, v.occurrences, v.detail)?;
            writeln!(f, "    state {} after {} steps:", v.state_hash, v.trace.len())?;
            for (i, e) in v.trace.events.iter().enumerate() {
                writeln!(f, "    {i:>4}  {e}")?;
            }
        }
        Ok(())
    }
}

/// Collects findings into one representative violation per class.
struct Recorder<'s> {
    kernel: Kernel<'s>,
    found: BTreeMap<ViolationKind, Violation>,
}

impl<'s> Recorder<'s> {
    fn new(kernel: Kernel<'s>) -> Self {
        Recorder { kernel, found: BTreeMap::new() }
    }

    fn record(&mut self, findings: Vec<Finding>, path: &[Choice], last: Option<&Choice>, state: &GlobalState) {
        for finding in findings {
            match self.found.get_mut(&finding.kind) {
                Some(v) => v.occurrences += 1,
                None => {
                    let trace = self.kernel.to_trace(path.iter().chain(last));
                    let violation = Violation {
                        kind: finding.kind.clone(),
                        detail: finding.detail,
                        occurrences: 1,
                        state_hash: state.hash_hex(),
                        trace,
                    };
                    self.found.insert(finding.kind, violation);
                }
            }
        }
    }

    fn into_violations(self) -> Vec<Violation> {
        self.found.into_values().collect()
    }
}

fn deadlock(state: &GlobalState, enabled: usize) -> Option<Finding> {
    (enabled == 0 && !state.all_terminated()).then(|| Finding {
        kind: ViolationKind::Deadlock,
        detail: "no step is enabled but some process has not terminated".into(),
    })
}

/// Monitor findings for a freshly reached state with `enabled` successors.
fn state_findings(scenario: &Scenario, state: &GlobalState, enabled: usize) -> Vec<Finding> {
    let mut findings = monitors::on_state(scenario, state);
    findings.extend(deadlock(state, enabled));
    findings
}

fn add_paths(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    a?.checked_add(b?)
}

/// Explores every interleaving of `scenario` within `bounds`.
pub fn explore(scenario: &Scenario, bounds: Bounds) -> ExplorationReport {
    explore_visiting(scenario, bounds, |_| {})
}

/// Like [`explore`], calling `visit` once for every distinct state in which
/// all processes have terminated.
pub fn explore_visiting(
    scenario: &Scenario,
    bounds: Bounds,
    mut visit: impl FnMut(&GlobalState),
) -> ExplorationReport {
    struct Frame {
        id: usize,
        state: Rc<GlobalState>,
        /// Remaining successors, reversed so `pop` yields branch order.
        pending: Vec<Transition>,
        leaf: bool,
        paths: Option<u64>,
    }

    let kernel = Kernel::new(scenario);
    let mut recorder = Recorder::new(kernel);
    let mut visited: HashMap<Rc<GlobalState>, usize> = HashMap::new();
    // Per state: still on the DFS stack, and its maximal-path count once done.
    let mut marks: Vec<(bool, Option<u64>)> = Vec::new();
    let mut path: Vec<Choice> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut bounds_hit = false;
    let mut terminal = 0u64;
    let mut deadlocked = 0u64;
    let mut schedules = None;

    let mut arrive = |state: &GlobalState,
                      path: &[Choice],
                      recorder: &mut Recorder<'_>,
                      marks: &mut Vec<(bool, Option<u64>)>|
     -> (Vec<Transition>, usize) {
        let successors = kernel.successors(state);
        let findings = state_findings(scenario, state, successors.len());
        recorder.record(findings, path, None, state);
        if state.all_terminated() {
            terminal += 1;
            visit(state);
        } else if successors.is_empty() {
            deadlocked += 1;
        }
        marks.push((true, None));
        (successors, marks.len() - 1)
    };

    let init = Rc::new(kernel.initial_state());
    let (successors, id) = arrive(&init, &path, &mut recorder, &mut marks);
    visited.insert(init.clone(), id);
    stack.push(Frame {
        id,
        state: init,
        leaf: successors.is_empty(),
        pending: successors.into_iter().rev().collect(),
        paths: Some(0),
    });

    while let Some(top) = stack.last_mut() {
        if let Some(t) = top.pending.pop() {
            let findings = monitors::on_transition(scenario, &top.state, &t.choice, &t.effect, &t.state);
            recorder.record(findings, &path, Some(&t.choice), &t.state);
            if let Some(&seen) = visited.get(&t.state) {
                let (on_stack, count) = marks[seen];
                top.paths = if on_stack { None } else { add_paths(top.paths, count) };
                continue;
            }
            if visited.len() >= bounds.max_states || path.len() + 1 > bounds.max_depth {
                bounds_hit = true;
                top.paths = None;
                continue;
            }
            path.push(t.choice);
            let state = Rc::new(t.state);
            let (successors, id) = arrive(&state, &path, &mut recorder, &mut marks);
            visited.insert(state.clone(), id);
            stack.push(Frame {
                id,
                state,
                leaf: successors.is_empty(),
                pending: successors.into_iter().rev().collect(),
                paths: Some(0),
            });
        } else {
            let frame = stack.pop().expect("non-empty stack");
            let count = if frame.leaf { Some(1) } else { frame.paths };
            marks[frame.id] = (false, count);
            match stack.last_mut() {
                Some(parent) => {
                    parent.paths = add_paths(parent.paths, count);
                    path.pop();
                }
                None => schedules = count,
            }
        }
    }

    ExplorationReport {
        scenario: scenario.name.clone(),
        states_visited: visited.len() as u64,
        distinct_terminal_states: terminal,
        deadlock_states: deadlocked,
        schedules_complete: if bounds_hit { None } else { schedules },
        bounds_hit,
        violations: recorder.into_violations(),
    }
}

/// Breadth-first search for a minimum-length counterexample of `kind`.
pub fn find_shortest(scenario: &Scenario, kind: &ViolationKind, bounds: Bounds) -> Option<Violation> {
    let kernel = Kernel::new(scenario);
    let mut states: Vec<Rc<GlobalState>> = Vec::new();
    let mut parents: Vec<Option<(usize, Choice)>> = Vec::new();
    let mut depth: Vec<usize> = Vec::new();
    let mut visited: HashMap<Rc<GlobalState>, usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let trace_to = |parents: &[Option<(usize, Choice)>], mut id: usize, last: Option<&Choice>| {
        let mut choices: Vec<Choice> = last.into_iter().cloned().collect();
        while let Some((parent, choice)) = &parents[id] {
            choices.push(choice.clone());
            id = *parent;
        }
        choices.reverse();
        kernel.to_trace(&choices)
    };
    let hit = |findings: Vec<Finding>| findings.into_iter().find(|f| f.kind == *kind);
    let violation = |finding: Finding, trace: Trace, state: &GlobalState| Violation {
        kind: finding.kind,
        detail: finding.detail,
        occurrences: 1,
        state_hash: state.hash_hex(),
        trace,
    };

    let init = Rc::new(kernel.initial_state());
    if let Some(f) = hit(state_findings(scenario, &init, kernel.successors(&init).len())) {
        return Some(violation(f, Trace::default(), &init));
    }
    states.push(init.clone());
    parents.push(None);
    depth.push(0);
    visited.insert(init, 0);
    queue.push_back(0);

    while let Some(id) = queue.pop_front() {
        if depth[id] >= bounds.max_depth {
            continue;
        }
        let state = states[id].clone();
        for t in kernel.successors(&state) {
            if let Some(f) = hit(monitors::on_transition(scenario, &state, &t.choice, &t.effect, &t.state)) {
                return Some(violation(f, trace_to(&parents, id, Some(&t.choice)), &t.state));
            }
            if visited.contains_key(&t.state) || visited.len() >= bounds.max_states {
                continue;
            }
            let next = Rc::new(t.state);
            let new_id = states.len();
            states.push(next.clone());
            parents.push(Some((id, t.choice)));
            depth.push(depth[id] + 1);
            visited.insert(next.clone(), new_id);
            if let Some(f) = hit(state_findings(scenario, &next, kernel.successors(&next).len())) {
                return Some(violation(f, trace_to(&parents, new_id, None), &next));
            }
            queue.push_back(new_id);
        }
    }
    None
}

/// Replays `trace` and returns the violation classes exhibited by its final
/// step: findings of the last event and of the state it reaches.
pub fn recheck(scenario: &Scenario, trace: &Trace) -> Result<BTreeSet<ViolationKind>, KernelError> {
    let kernel = Kernel::new(scenario);
    let mut state = kernel.initial_state();
    let mut last_step = Vec::new();
    for (index, event) in trace.events.iter().enumerate() {
        let choice = kernel.resolve(index, event)?;
        let t = kernel
            .transition(&state, &choice)
            .map_err(|_| KernelError::NotEnabledAtStep { index, event: event.to_string() })?;
        last_step = monitors::on_transition(scenario, &state, &t.choice, &t.effect, &t.state);
        state = t.state;
    }
    let enabled = kernel.successors(&state).len();
    Ok(last_step
        .into_iter()
        .chain(state_findings(scenario, &state, enabled))
        .map(|f| f.kind)
        .collect())
}

#[derive(Clone, Debug, Default)]
pub struct RandomWalkReport {
    pub walks: usize,
    /// First witness schedule per violation class.
    pub witnesses: BTreeMap<ViolationKind, Trace>,
}

impl RandomWalkReport {
    pub fn classes(&self) -> BTreeSet<ViolationKind> {
        self.witnesses.keys().cloned().collect()
    }
}

/// Runs `walks` random schedules, each picking uniformly among enabled steps
/// until the scenario terminates, deadlocks, or `max_depth` steps are taken.
pub fn random_walks(scenario: &Scenario, walks: usize, max_depth: usize, seed: u64) -> RandomWalkReport {
    let kernel = Kernel::new(scenario);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = RandomWalkReport { walks, ..Default::default() };
    let initial = kernel.initial_state();
    for _ in 0..walks {
        let mut state = initial.clone();
        let mut path: Vec<Choice> = Vec::new();
        let mut successors = kernel.successors(&state);
        let mut findings = state_findings(scenario, &state, successors.len());
        loop {
            for f in findings.drain(..) {
                report.witnesses.entry(f.kind).or_insert_with(|| kernel.to_trace(&path));
            }
            if successors.is_empty() || path.len() >= max_depth {
                break;
            }
            let pick = rng.gen_range(0..successors.len());
            let t = successors.swap_remove(pick);
            findings = monitors::on_transition(scenario, &state, &t.choice, &t.effect, &t.state);
            path.push(t.choice);
            state = t.state;
            successors = kernel.successors(&state);
            findings.extend(state_findings(scenario, &state, successors.len()));
        }
    }
    report
}
