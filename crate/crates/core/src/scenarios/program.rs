//! Process programs: static checks over the step tree and compilation to a
//! flat node graph the kernel can step through.

use std::collections::BTreeSet;

use crate::mechanisms::{Access, MechanismState};
use crate::value::{Msg, ProcessId, UpdateFn, Value, Word, WORD_LIMIT};

use super::format::{Step, ValueExpr, WordExpr};
use super::ValidationIssue;

/// Program counter. `END` means the process has terminated.
pub type Pc = u16;
pub const END: Pc = Pc::MAX;

pub const MAX_NESTING: usize = 3;
pub const MAX_UNROLLED_STEPS: u64 = 64;
pub const MAX_LOCALS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operand {
    Lit(Value),
    Var(usize),
    Empty,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WordOperand {
    Lit(Word),
    Var(usize),
}

/// One kernel step of a process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Write { mech: usize, value: Operand },
    Read { mech: usize, bind: usize },
    Send { mech: usize, value: Operand },
    Receive { mech: usize, bind: usize },
    Lock { mech: usize },
    Unlock { mech: usize },
    ReadWord { mech: usize, index: usize, bind: Option<usize> },
    WriteWord { mech: usize, index: usize, word: WordOperand },
    Check { mech: usize, bind: Option<usize> },
    Update { mech: usize, function: UpdateFn },
    Local { var: usize, value: Operand },
    Compute { var: usize, function: UpdateFn },
    AssertLocal { var: usize, expected: Msg },
    Skip,
}

impl Op {
    pub fn mechanism(&self) -> Option<usize> {
        match self {
            Op::Write { mech, .. }
            | Op::Read { mech, .. }
            | Op::Send { mech, .. }
            | Op::Receive { mech, .. }
            | Op::Lock { mech }
            | Op::Unlock { mech }
            | Op::ReadWord { mech, .. }
            | Op::WriteWord { mech, .. }
            | Op::Check { mech, .. }
            | Op::Update { mech, .. } => Some(*mech),
            Op::Local { .. } | Op::Compute { .. } | Op::AssertLocal { .. } | Op::Skip => None,
        }
    }
}

/// Where control goes after an action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Next {
    Goto(Pc),
    /// After a status check: `then` if a message is waiting for the checker.
    IfReadable { then: Pc, otherwise: Pc },
    /// After a word read: `then` if the word equals `word`.
    IfWord { word: Word, then: Pc, otherwise: Pc },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Action { op: Op, next: Next, section: Option<usize> },
    /// The process offers the first action of every branch at once.
    Choice { branches: Vec<Pc>, section: Option<usize> },
}

impl Node {
    pub fn section(&self) -> Option<usize> {
        match self {
            Node::Action { section, .. } | Node::Choice { section, .. } => *section,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub nodes: Vec<Node>,
    pub entry: Pc,
    /// Local variable names, indexed by slot.
    pub vars: Vec<String>,
}

impl Program {
    /// Action nodes the process can fire from `pc` (more than one at a choice).
    pub fn candidates(&self, pc: Pc) -> Vec<Pc> {
        if pc == END {
            return Vec::new();
        }
        match &self.nodes[pc as usize] {
            Node::Action { .. } => vec![pc],
            Node::Choice { branches, .. } => branches.clone(),
        }
    }

    pub fn action(&self, pc: Pc) -> Option<(&Op, &Next)> {
        match self.nodes.get(pc as usize)? {
            Node::Action { op, next, .. } => Some((op, next)),
            Node::Choice { .. } => None,
        }
    }

    pub fn section_at(&self, pc: Pc) -> Option<usize> {
        if pc == END {
            None
        } else {
            self.nodes[pc as usize].section()
        }
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }
}

/// Scenario-wide names a program may refer to.
pub(crate) struct Context<'a> {
    pub mechanisms: &'a [(String, MechanismState)],
    pub word_width: usize,
    pub sections: &'a mut Vec<String>,
}

impl Context<'_> {
    fn mech(&self, name: &str) -> Option<(usize, &MechanismState)> {
        self.mechanisms.iter().position(|(id, _)| id == name).map(|i| (i, &self.mechanisms[i].1))
    }

    fn section(&mut self, name: &str) -> usize {
        match self.sections.iter().position(|s| s == name) {
            Some(i) => i,
            None => {
                self.sections.push(name.to_string());
                self.sections.len() - 1
            }
        }
    }
}

pub(crate) fn literal(words: &[Word], width: usize) -> Result<Value, String> {
    if words.len() != width {
        return Err(format!("value {words:?} has {} words, expected {width}", words.len()));
    }
    Value::new(words.to_vec()).ok_or_else(|| format!("value {words:?} has a word outside 0..{WORD_LIMIT}"))
}

struct Checker<'c, 'a> {
    ctx: &'c mut Context<'a>,
    process: ProcessId,
    vars: Vec<String>,
    issues: Vec<ValidationIssue>,
}

/// Statically checks a program. Returns the issues found (empty on success).
pub(crate) fn check(ctx: &mut Context<'_>, process: ProcessId, steps: &[Step], path: &str) -> Vec<ValidationIssue> {
    let mut checker = Checker { ctx, process, vars: Vec::new(), issues: Vec::new() };
    let mut bound = BTreeSet::new();
    checker.block(steps, &mut bound, path, 0);
    let size = unrolled_size(steps);
    if size > MAX_UNROLLED_STEPS {
        checker.issue(path, format!("program unrolls to {size} steps, limit is {MAX_UNROLLED_STEPS}"));
    }
    if checker.vars.len() > MAX_LOCALS {
        let names = checker.vars.join(", ");
        checker.issue(path, format!("{} local variables ({names}), limit is {MAX_LOCALS}", checker.vars.len()));
    }
    checker.issues
}

fn unrolled_size(steps: &[Step]) -> u64 {
    steps.iter().fold(0u64, |acc, step| {
        let n = match step {
            Step::Loop { count, body } => (*count as u64).saturating_mul(unrolled_size(body)),
            Step::IfStatus { full, empty, .. } => 1 + unrolled_size(full) + unrolled_size(empty),
            Step::IfWord { then, otherwise, .. } => 1 + unrolled_size(then) + unrolled_size(otherwise),
            Step::WhileWord { body, .. } => 1 + unrolled_size(body),
            Step::Select { branches } => branches.iter().map(|b| unrolled_size(b)).fold(1, u64::saturating_add),
            Step::Critical { body, .. } => unrolled_size(body).max(1),
            _ => 1,
        };
        acc.saturating_add(n)
    })
}

impl Checker<'_, '_> {
    fn issue(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(ValidationIssue { path: path.to_string(), message: message.into() });
    }

    fn declare(&mut self, name: &str) {
        if !self.vars.iter().any(|v| v == name) {
            self.vars.push(name.to_string());
        }
    }

    fn block(&mut self, steps: &[Step], bound: &mut BTreeSet<String>, path: &str, depth: usize) {
        if depth > MAX_NESTING {
            self.issue(path, format!("nesting depth {depth} exceeds {MAX_NESTING}"));
            return;
        }
        for (i, step) in steps.iter().enumerate() {
            self.step(step, bound, &format!("{path}[{i}]"), depth);
        }
    }

    /// Resolves `name` and checks that `access` is part of its interface.
    fn mech_access(&mut self, name: &str, access: Access, path: &str) {
        let Some((_, state)) = self.ctx.mech(name) else {
            self.issue(path, format!("unknown mechanism \"{name}\""));
            return;
        };
        if !state.supports(&access) {
            let kind = state.kind_name();
            self.issue(path, format!("{kind} \"{name}\" does not support {access:?}"));
            return;
        }
        if let MechanismState::DuplexChannel(d) = state {
            if self.process != d.side_a && self.process != d.side_b {
                let p = self.process;
                self.issue(path, format!("{p} is not a side of duplex channel \"{name}\""));
            }
        }
    }

    fn direct(&mut self, name: &str, path: &str) {
        match self.ctx.mech(name) {
            None => self.issue(path, format!("unknown mechanism \"{name}\"")),
            Some((_, MechanismState::DirectChannel)) => {}
            Some((_, other)) => {
                let kind = other.kind_name();
                self.issue(path, format!("send/receive need a direct_channel, \"{name}\" is a {kind}"));
            }
        }
    }

    fn index(&mut self, index: usize, path: &str) {
        if index >= self.ctx.word_width {
            let w = self.ctx.word_width;
            self.issue(path, format!("word index {index} out of range for width {w}"));
        }
    }

    fn word(&mut self, word: Word, path: &str) {
        if word >= WORD_LIMIT {
            self.issue(path, format!("word {word} outside 0..{WORD_LIMIT}"));
        }
    }

    fn value(&mut self, expr: &ValueExpr, bound: &BTreeSet<String>, allow_empty: bool, path: &str) {
        match expr {
            ValueExpr::Lit(words) => {
                if let Err(e) = literal(words, self.ctx.word_width) {
                    self.issue(path, e);
                }
            }
            ValueExpr::Var(name) => {
                if !bound.contains(name) {
                    self.issue(path, format!("variable \"{name}\" used before it is bound"));
                }
            }
            ValueExpr::Empty => {
                if !allow_empty {
                    self.issue(path, "the empty indicator cannot be written here");
                }
            }
        }
    }

    fn function(&mut self, name: &str, path: &str) -> Option<UpdateFn> {
        match name.parse::<UpdateFn>() {
            Ok(f) => Some(f),
            Err(e) => {
                self.issue(path, e.to_string());
                None
            }
        }
    }

    fn bind(&mut self, name: &str, bound: &mut BTreeSet<String>) {
        self.declare(name);
        bound.insert(name.to_string());
    }

    fn step(&mut self, step: &Step, bound: &mut BTreeSet<String>, path: &str, depth: usize) {
        match step {
            Step::Write { mech, value } => {
                let is_cell = matches!(self.ctx.mech(mech), Some((_, MechanismState::MessageCell(_))));
                self.mech_access(mech, Access::Write(None), path);
                self.value(value, bound, is_cell, path);
            }
            Step::Read { mech, bind } => {
                self.mech_access(mech, Access::Read, path);
                self.bind(bind, bound);
            }
            Step::Send { mech, value } => {
                self.direct(mech, path);
                self.value(value, bound, true, path);
            }
            Step::Receive { mech, bind } => {
                self.direct(mech, path);
                self.bind(bind, bound);
            }
            Step::Lock { mech } => self.mech_access(mech, Access::Lock, path),
            Step::Unlock { mech } => self.mech_access(mech, Access::Unlock, path),
            Step::ReadWord { mech, index, bind } => {
                self.mech_access(mech, Access::ReadWord(*index), path);
                self.index(*index, path);
                if let Some(var) = bind {
                    self.bind(var, bound);
                }
            }
            Step::WriteWord { mech, index, word } => {
                self.mech_access(mech, Access::WriteWord(*index, 0), path);
                self.index(*index, path);
                match word {
                    WordExpr::Lit(w) => self.word(*w, path),
                    WordExpr::Var(name) if !bound.contains(name) => {
                        self.issue(path, format!("variable \"{name}\" used before it is bound"))
                    }
                    WordExpr::Var(_) => {}
                }
            }
            Step::Check { mech, bind } => {
                self.mech_access(mech, Access::Check, path);
                self.bind(bind, bound);
            }
            Step::Update { mech, function } => {
                self.mech_access(mech, Access::Update(UpdateFn::Inc), path);
                self.function(function, path);
            }
            Step::Loop { count, body } => {
                if *count == 0 {
                    self.issue(path, "loop count must be at least 1");
                }
                self.block(body, bound, &format!("{path}.body"), depth + 1);
            }
            Step::IfStatus { mech, full, empty } => {
                self.mech_access(mech, Access::Check, path);
                let mut a = bound.clone();
                let mut b = bound.clone();
                self.block(full, &mut a, &format!("{path}.full"), depth + 1);
                self.block(empty, &mut b, &format!("{path}.empty"), depth + 1);
                *bound = a.intersection(&b).cloned().collect();
            }
            Step::IfWord { mech, index, word, then, otherwise } => {
                self.mech_access(mech, Access::ReadWord(*index), path);
                self.index(*index, path);
                self.word(*word, path);
                let mut a = bound.clone();
                let mut b = bound.clone();
                self.block(then, &mut a, &format!("{path}.then"), depth + 1);
                self.block(otherwise, &mut b, &format!("{path}.otherwise"), depth + 1);
                *bound = a.intersection(&b).cloned().collect();
            }
            Step::WhileWord { mech, index, word, body } => {
                self.mech_access(mech, Access::ReadWord(*index), path);
                self.index(*index, path);
                self.word(*word, path);
                let mut inner = bound.clone();
                self.block(body, &mut inner, &format!("{path}.body"), depth + 1);
            }
            Step::Select { branches } => self.select(branches, bound, path, depth),
            Step::Critical { section, body } => {
                if section.is_empty() {
                    self.issue(path, "critical section needs a name");
                }
                self.ctx.section(section);
                self.block(body, bound, &format!("{path}.body"), depth + 1);
            }
            Step::AssertLocal { var, value } => {
                if !bound.contains(var) {
                    self.issue(path, format!("variable \"{var}\" used before it is bound"));
                }
                if matches!(value, ValueExpr::Var(_)) {
                    self.issue(path, "assert_local expects a literal or Empty");
                }
                self.value(value, bound, true, path);
            }
            Step::Local { var, value } => {
                self.value(value, bound, true, path);
                self.bind(var, bound);
            }
            Step::Compute { var, function } => {
                if !bound.contains(var) {
                    self.issue(path, format!("variable \"{var}\" used before it is bound"));
                }
                self.function(function, path);
            }
            Step::Skip => {}
        }
    }

    fn select(&mut self, branches: &[Vec<Step>], bound: &mut BTreeSet<String>, path: &str, depth: usize) {
        if branches.is_empty() {
            self.issue(path, "select needs at least one branch");
            return;
        }
        let mut heads = BTreeSet::new();
        let mut after: Option<BTreeSet<String>> = None;
        for (i, branch) in branches.iter().enumerate() {
            let bpath = format!("{path}.branches[{i}]");
            match branch.first().and_then(head_key) {
                None => self.issue(&bpath, "each branch must start with a mechanism action"),
                Some(key) => {
                    if !heads.insert(key.clone()) {
                        self.issue(&bpath, format!("two branches start with {} on \"{}\"", key.1, key.0));
                    }
                }
            }
            let mut b = bound.clone();
            self.block(branch, &mut b, &bpath, depth + 1);
            after = Some(match after {
                None => b,
                Some(a) => a.intersection(&b).cloned().collect(),
            });
        }
        *bound = after.unwrap_or_default();
    }
}

/// Identifies the first action of a select branch; `None` for steps that are
/// not plain mechanism actions.
fn head_key(step: &Step) -> Option<(String, &'static str)> {
    let (mech, kind) = match step {
        Step::Write { mech, .. } => (mech, "write"),
        Step::Read { mech, .. } => (mech, "read"),
        Step::Send { mech, .. } => (mech, "send"),
        Step::Receive { mech, .. } => (mech, "receive"),
        Step::Lock { mech } => (mech, "lock"),
        Step::Unlock { mech } => (mech, "unlock"),
        Step::ReadWord { mech, .. } | Step::IfWord { mech, .. } => (mech, "read_word"),
        Step::WriteWord { mech, .. } => (mech, "write_word"),
        Step::Check { mech, .. } | Step::IfStatus { mech, .. } => (mech, "check"),
        Step::Update { mech, .. } => (mech, "update"),
        _ => return None,
    };
    Some((mech.clone(), kind))
}

/// Compiles a program that has passed [`check`].
pub(crate) fn compile(ctx: &mut Context<'_>, steps: &[Step]) -> Program {
    let mut compiler = Compiler { ctx, nodes: Vec::new(), vars: Vec::new() };
    let entry = compiler.block(steps, END, None);
    Program { nodes: compiler.nodes, entry, vars: compiler.vars }
}

struct Compiler<'c, 'a> {
    ctx: &'c mut Context<'a>,
    nodes: Vec<Node>,
    vars: Vec<String>,
}

impl Compiler<'_, '_> {
    fn var(&mut self, name: &str) -> usize {
        match self.vars.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                self.vars.push(name.to_string());
                self.vars.len() - 1
            }
        }
    }

    fn mech(&self, name: &str) -> usize {
        self.ctx.mech(name).expect("checked mechanism").0
    }

    fn operand(&mut self, expr: &ValueExpr) -> Operand {
        match expr {
            ValueExpr::Lit(words) => Operand::Lit(literal(words, self.ctx.word_width).expect("checked literal")),
            ValueExpr::Var(name) => Operand::Var(self.var(name)),
            ValueExpr::Empty => Operand::Empty,
        }
    }

    fn push(&mut self, node: Node) -> Pc {
        self.nodes.push(node);
        (self.nodes.len() - 1) as Pc
    }

    fn action(&mut self, op: Op, cont: Pc, section: Option<usize>) -> Pc {
        self.push(Node::Action { op, next: Next::Goto(cont), section })
    }

    /// Compiles `steps` so that control continues at `cont`; returns the entry.
    fn block(&mut self, steps: &[Step], cont: Pc, section: Option<usize>) -> Pc {
        // Variable slots are numbered in source order, so bind them up front.
        for step in steps {
            self.declare_vars(step);
        }
        steps.iter().rev().fold(cont, |cont, step| self.step(step, cont, section))
    }

    fn declare_vars(&mut self, step: &Step) {
        match step {
            Step::Read { bind, .. } | Step::Receive { bind, .. } | Step::Check { bind, .. } => {
                self.var(bind);
            }
            Step::ReadWord { bind: Some(bind), .. } => {
                self.var(bind);
            }
            Step::Local { var, .. } => {
                self.var(var);
            }
            Step::Loop { body, .. } | Step::WhileWord { body, .. } | Step::Critical { body, .. } => {
                body.iter().for_each(|s| self.declare_vars(s))
            }
            Step::IfStatus { full: a, empty: b, .. } | Step::IfWord { then: a, otherwise: b, .. } => {
                a.iter().chain(b).for_each(|s| self.declare_vars(s))
            }
            Step::Select { branches } => branches.iter().flatten().for_each(|s| self.declare_vars(s)),
            _ => {}
        }
    }

    fn step(&mut self, step: &Step, cont: Pc, section: Option<usize>) -> Pc {
        let op = match step {
            Step::Write { mech, value } => Op::Write { mech: self.mech(mech), value: self.operand(value) },
            Step::Read { mech, bind } => Op::Read { mech: self.mech(mech), bind: self.var(bind) },
            Step::Send { mech, value } => Op::Send { mech: self.mech(mech), value: self.operand(value) },
            Step::Receive { mech, bind } => Op::Receive { mech: self.mech(mech), bind: self.var(bind) },
            Step::Lock { mech } => Op::Lock { mech: self.mech(mech) },
            Step::Unlock { mech } => Op::Unlock { mech: self.mech(mech) },
            Step::ReadWord { mech, index, bind } => Op::ReadWord {
                mech: self.mech(mech),
                index: *index,
                bind: bind.as_deref().map(|b| self.var(b)),
            },
            Step::WriteWord { mech, index, word } => Op::WriteWord {
                mech: self.mech(mech),
                index: *index,
                word: match word {
                    WordExpr::Lit(w) => WordOperand::Lit(*w),
                    WordExpr::Var(name) => WordOperand::Var(self.var(name)),
                },
            },
            Step::Check { mech, bind } => Op::Check { mech: self.mech(mech), bind: Some(self.var(bind)) },
            Step::Update { mech, function } => {
                Op::Update { mech: self.mech(mech), function: function.parse().expect("checked function") }
            }
            Step::AssertLocal { var, value } => {
                let expected = match self.operand(value) {
                    Operand::Lit(v) => Some(v),
                    _ => None,
                };
                Op::AssertLocal { var: self.var(var), expected }
            }
            Step::Local { var, value } => Op::Local { var: self.var(var), value: self.operand(value) },
            Step::Compute { var, function } => {
                Op::Compute { var: self.var(var), function: function.parse().expect("checked function") }
            }
            Step::Skip => Op::Skip,
            Step::Loop { count, body } => {
                return (0..*count).fold(cont, |cont, _| self.block(body, cont, section));
            }
            Step::IfStatus { mech, full, empty } => {
                let then = self.block(full, cont, section);
                let otherwise = self.block(empty, cont, section);
                let op = Op::Check { mech: self.mech(mech), bind: None };
                return self.push(Node::Action { op, next: Next::IfReadable { then, otherwise }, section });
            }
            Step::IfWord { mech, index, word, then, otherwise } => {
                let then = self.block(then, cont, section);
                let otherwise = self.block(otherwise, cont, section);
                let op = Op::ReadWord { mech: self.mech(mech), index: *index, bind: None };
                let next = Next::IfWord { word: *word, then, otherwise };
                return self.push(Node::Action { op, next, section });
            }
            Step::WhileWord { mech, index, word, body } => {
                let op = Op::ReadWord { mech: self.mech(mech), index: *index, bind: None };
                let head = self.push(Node::Action { op, next: Next::Goto(cont), section });
                let body_entry = self.block(body, head, section);
                if let Node::Action { next, .. } = &mut self.nodes[head as usize] {
                    *next = Next::IfWord { word: *word, then: body_entry, otherwise: cont };
                }
                return head;
            }
            Step::Select { branches } => {
                let starts = branches.iter().map(|b| self.block(b, cont, section)).collect();
                return self.push(Node::Choice { branches: starts, section });
            }
            Step::Critical { section: name, body } => {
                let inner = Some(self.ctx.section(name));
                if body.is_empty() {
                    return self.action(Op::Skip, cont, inner);
                }
                return self.block(body, cont, inner);
            }
        };
        self.action(op, cont, section)
    }
}
