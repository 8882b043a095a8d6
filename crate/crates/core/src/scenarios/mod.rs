//! Scenario documents: loading, validation, serialization, monitors and the
//! built-in catalog.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::explorer::Bounds;
use crate::mechanisms::{
    DuplexChannel, LastMessageChannel, LockMode, LockedCell, MechanismState, MessageCell, RawCell,
    SharedRegister, StatusChannel,
};
use crate::value::{Msg, ProcessId, Value, MAX_WORD_WIDTH};

pub mod catalog;
pub mod format;
pub mod monitors;
pub mod program;

pub use catalog::{catalog, catalog_entry, CatalogEntry, Expectation};
pub use format::{MechanismDoc, MonitorDoc, ProcessDoc, ScenarioDoc, Step, ValueExpr, WordExpr};
pub use monitors::Monitor;
pub use program::Program;

/// One static problem, located by a path into the document
/// (e.g. `processes[1].program[2]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<ValidationIssue>),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanismDecl {
    pub id: String,
    pub initial: MechanismState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessDecl {
    pub id: ProcessId,
    pub name: String,
    pub program: Program,
}

/// Which observer bookkeeping the kernel keeps, per mechanism index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct GhostPlan {
    pub log: Vec<bool>,
    pub pending: Vec<bool>,
    pub assemble: Vec<bool>,
}

/// A validated, compiled scenario.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub word_width: usize,
    pub mechanisms: Vec<MechanismDecl>,
    pub processes: Vec<ProcessDecl>,
    pub monitors: Vec<Monitor>,
    /// Critical section names, indexed as in compiled programs.
    pub sections: Vec<String>,
    pub bounds: Bounds,
    pub(crate) ghost: GhostPlan,
    doc: ScenarioDoc,
}

/// Parses and validates a scenario document.
pub fn load(document: &str) -> Result<Scenario, LoadError> {
    let doc: ScenarioDoc = from_ron(document).map_err(|e| LoadError::Parse {
        line: e.position.line,
        column: e.position.col,
        message: e.code.to_string(),
    })?;
    Scenario::from_doc(doc)
}

pub fn load_file(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    load(&text)
}

/// Parses RON with `Some(..)` optional around optional fields.
pub(crate) fn from_ron<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ron::error::SpannedError> {
    ron::Options::default()
        .with_default_extension(ron::extensions::Extensions::IMPLICIT_SOME)
        .from_str(text)
}

/// Pretty RON with `Some(..)` elided.
pub(crate) fn to_ron<T: serde::Serialize>(value: &T) -> String {
    let config = ron::ser::PrettyConfig::new()
        .struct_names(false)
        .extensions(ron::extensions::Extensions::IMPLICIT_SOME);
    ron::ser::to_string_pretty(value, config).expect("RON serialization of plain data")
}

impl Scenario {
    pub fn from_doc(doc: ScenarioDoc) -> Result<Scenario, LoadError> {
        validate(doc).map_err(LoadError::Validation)
    }

    /// Serializes back to a document that loads to an equal scenario.
    pub fn to_document(&self) -> String {
        to_ron(&self.doc)
    }

    pub fn doc(&self) -> &ScenarioDoc {
        &self.doc
    }

    pub fn mechanism_index(&self, id: &str) -> Option<usize> {
        self.mechanisms.iter().position(|m| m.id == id)
    }

    pub fn process_by_name(&self, name: &str) -> Option<ProcessId> {
        self.processes.iter().find(|p| p.name == name).map(|p| p.id)
    }
}

fn validate(doc: ScenarioDoc) -> Result<Scenario, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    let mut issue = |path: &str, message: String| issues.push(ValidationIssue { path: path.into(), message });

    if doc.name.trim().is_empty() {
        issue("name", "scenario name is empty".into());
    }
    let width = doc.word_width;
    if width == 0 || width > MAX_WORD_WIDTH {
        issue("word_width", format!("word width {width} outside 1..={MAX_WORD_WIDTH}"));
    }
    if let Some(b) = &doc.bounds {
        if b.max_depth == 0 || b.max_states == 0 {
            issue("bounds", "bounds must be positive".into());
        }
    }
    for (i, p) in doc.processes.iter().enumerate() {
        if p.id as usize != i {
            issue(&format!("processes[{i}].id"), format!("process ids must be dense 0..P, found {} at {i}", p.id));
        }
    }

    let nprocs = doc.processes.len();
    let mut mechanisms: Vec<(String, MechanismState)> = Vec::new();
    for (i, m) in doc.mechanisms.iter().enumerate() {
        let path = format!("mechanisms[{i}]");
        if m.id.is_empty() {
            issue(&path, "mechanism id is empty".into());
        }
        if mechanisms.iter().any(|(id, _)| *id == m.id) {
            issue(&path, format!("duplicate mechanism id \"{}\"", m.id));
        }
        match mechanism_state(m, width, nprocs) {
            Ok(state) => mechanisms.push((m.id.clone(), state)),
            Err(msg) => issue(&path, format!("\"{}\": {msg}", m.id)),
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }

    let mut sections = Vec::new();
    let mut processes = Vec::new();
    for (i, p) in doc.processes.iter().enumerate() {
        let mut ctx = program::Context { mechanisms: &mechanisms, word_width: width, sections: &mut sections };
        let pid = ProcessId(i as u16);
        let found = program::check(&mut ctx, pid, &p.program, &format!("processes[{i}].program"));
        if found.is_empty() {
            let program = program::compile(&mut ctx, &p.program);
            processes.push(ProcessDecl { id: pid, name: p.name.clone(), program });
        }
        issues.extend(found);
    }
    if !issues.is_empty() {
        return Err(issues);
    }

    let used: BTreeSet<usize> = processes
        .iter()
        .flat_map(|p| p.program.nodes.iter())
        .filter_map(|n| match n {
            program::Node::Action { op, .. } => op.mechanism(),
            program::Node::Choice { .. } => None,
        })
        .collect();
    for (i, (id, _)) in mechanisms.iter().enumerate() {
        if !used.contains(&i) {
            issues.push(ValidationIssue {
                path: format!("mechanisms[{i}]"),
                message: format!("mechanism \"{id}\" is not used by any process"),
            });
        }
    }

    let mut ghost = GhostPlan {
        log: vec![false; mechanisms.len()],
        pending: vec![false; mechanisms.len()],
        assemble: vec![false; mechanisms.len()],
    };
    let mut monitors = Vec::new();
    for (i, m) in doc.monitors.iter().enumerate() {
        let path = format!("monitors[{i}]");
        match monitors::compile(m, &mechanisms, &processes, &sections, width) {
            Ok(monitor) => {
                monitor.plan(&mut ghost);
                monitors.push(monitor);
            }
            Err(msg) => issues.push(ValidationIssue { path, message: msg }),
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }

    Ok(Scenario {
        name: doc.name.clone(),
        description: doc.description.clone(),
        word_width: width,
        mechanisms: mechanisms.into_iter().map(|(id, initial)| MechanismDecl { id, initial }).collect(),
        processes,
        monitors,
        sections,
        bounds: doc.bounds.unwrap_or_default(),
        ghost,
        doc,
    })
}

fn mechanism_state(m: &MechanismDoc, width: usize, nprocs: usize) -> Result<MechanismState, String> {
    let words = match &m.initial {
        None => vec![0; width],
        Some(words) => {
            if !matches!(m.kind.as_str(), "raw_cell" | "locked_cell" | "shared_register") {
                return Err(format!("{} has no initial content", m.kind));
            }
            program::literal(words, width)?.words().to_vec()
        }
    };
    let duplex_fields = m.side_a.is_some() || m.side_b.is_some() || m.last_message.is_some();
    if duplex_fields && m.kind != "duplex_channel" {
        return Err("side_a/side_b/last_message apply to duplex_channel only".into());
    }
    if m.mode.is_some() && m.kind != "locked_cell" {
        return Err("mode applies to locked_cell only".into());
    }
    Ok(match m.kind.as_str() {
        "raw_cell" => MechanismState::RawCell(RawCell { words }),
        "locked_cell" => {
            let mode = match m.mode.as_deref() {
                None | Some("encapsulated") => LockMode::Encapsulated,
                Some("undisciplined") => LockMode::Undisciplined,
                Some(other) => return Err(format!("unknown lock mode \"{other}\"")),
            };
            MechanismState::LockedCell(LockedCell::new(words, mode))
        }
        "message_cell" => MechanismState::MessageCell(MessageCell::default()),
        "status_channel" => MechanismState::StatusChannel(StatusChannel::default()),
        "last_message_channel" => MechanismState::LastMessageChannel(LastMessageChannel::default()),
        "shared_register" => {
            MechanismState::SharedRegister(SharedRegister::new(Value::new(words).expect("checked")))
        }
        "direct_channel" => MechanismState::DirectChannel,
        "duplex_channel" => {
            let (Some(a), Some(b)) = (m.side_a, m.side_b) else {
                return Err("duplex_channel needs side_a and side_b".into());
            };
            if a == b {
                return Err(format!("duplex sides must differ, both are p{a}"));
            }
            for side in [a, b] {
                if side as usize >= nprocs {
                    return Err(format!("duplex side p{side} is not a declared process"));
                }
            }
            let last = m.last_message.unwrap_or(false);
            MechanismState::DuplexChannel(DuplexChannel::new(ProcessId(a), ProcessId(b), last))
        }
        other => return Err(format!("unknown mechanism kind \"{other}\"")),
    })
}

/// Resolves a literal-or-empty expression used by assertions.
pub(crate) fn expected_msg(expr: &ValueExpr, width: usize) -> Result<Msg, String> {
    match expr {
        ValueExpr::Lit(words) => program::literal(words, width).map(Some),
        ValueExpr::Empty => Ok(None),
        ValueExpr::Var(_) => Err("expected a literal or Empty".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"(
        name: "minimal",
        mechanisms: [(id: "c", kind: "status_channel")],
        processes: [
            (id: 0, program: [Write(mech: "c", value: Lit([1, 2]))]),
            (id: 1, program: [Read(mech: "c", bind: "x")]),
        ],
    )"#;

    fn issues(doc: &str) -> Vec<ValidationIssue> {
        match load(doc) {
            Err(LoadError::Validation(issues)) => issues,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_loads() {
        let sc = load(MINIMAL).unwrap();
        assert_eq!(sc.word_width, 2);
        assert_eq!(sc.processes.len(), 2);
        assert_eq!(sc.bounds, Bounds::default());
    }

    #[test]
    fn undeclared_mechanism_is_named() {
        let doc = MINIMAL.replace(r#"Read(mech: "c""#, r#"Read(mech: "c9""#);
        let found = issues(&doc);
        assert_eq!(found.len(), 1);
        assert!(found[0].message.contains("\"c9\""), "{found:?}");
        assert_eq!(found[0].path, "processes[1].program[0]");
    }

    #[test]
    fn duplex_sides_must_differ() {
        let doc = r#"(
            name: "bad-duplex",
            mechanisms: [(id: "d", kind: "duplex_channel", side_a: 0, side_b: 0)],
            processes: [(id: 0, program: [Write(mech: "d", value: Lit([1, 1]))])],
        )"#;
        let found = issues(doc);
        assert!(found[0].message.contains("sides must differ"), "{found:?}");
    }

    #[test]
    fn duplex_rejects_third_party_programs() {
        let doc = r#"(
            name: "third",
            mechanisms: [(id: "d", kind: "duplex_channel", side_a: 0, side_b: 1)],
            processes: [
                (id: 0, program: [Write(mech: "d", value: Lit([1, 1]))]),
                (id: 1, program: [Read(mech: "d", bind: "x")]),
                (id: 2, program: [Read(mech: "d", bind: "x")]),
            ],
        )"#;
        let found = issues(doc);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].path, "processes[2].program[0]");
    }

    #[test]
    fn static_errors_are_reported_together() {
        let doc = r#"(
            name: "many",
            mechanisms: [
                (id: "r", kind: "shared_register"),
                (id: "q", kind: "queue"),
            ],
            processes: [(id: 0, program: [Update(mech: "r", function: "square")])],
        )"#;
        let found = issues(doc);
        assert!(found.iter().any(|i| i.message.contains("unknown mechanism kind \"queue\"")), "{found:?}");

        let doc = r#"(
            name: "many",
            mechanisms: [(id: "r", kind: "shared_register")],
            processes: [(id: 0, program: [
                Update(mech: "r", function: "square"),
                Write(mech: "r", value: Var("nope")),
            ])],
        )"#;
        let found = issues(doc);
        assert_eq!(found.len(), 2, "{found:?}");
        assert!(found[0].message.contains("square"));
        assert!(found[1].message.contains("\"nope\""));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match load("(\n  name: \"x\",\n  mechanisms: [ oops ],\n)") {
            Err(LoadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn program_limits_are_enforced() {
        let doc = r#"(
            name: "big",
            mechanisms: [(id: "r", kind: "shared_register")],
            processes: [(id: 0, program: [Loop(count: 65, body: [Update(mech: "r", function: "inc")])])],
        )"#;
        assert!(issues(doc)[0].message.contains("unrolls to 65"));

        let deep = r#"(
            name: "deep",
            mechanisms: [(id: "r", kind: "shared_register")],
            processes: [(id: 0, program: [Loop(count: 1, body: [Loop(count: 1, body: [
                Loop(count: 1, body: [Loop(count: 1, body: [Update(mech: "r", function: "inc")])])
            ])])])],
        )"#;
        assert!(issues(deep)[0].message.contains("nesting depth 4"));

        let vars = r#"(
            name: "vars",
            mechanisms: [(id: "r", kind: "shared_register")],
            processes: [(id: 0, program: [
                Read(mech: "r", bind: "a"), Read(mech: "r", bind: "b"), Read(mech: "r", bind: "c"),
                Read(mech: "r", bind: "d"), Read(mech: "r", bind: "e"),
            ])],
        )"#;
        assert!(issues(vars)[0].message.contains("5 local variables"));
    }

    #[test]
    fn branch_bindings_must_agree() {
        let doc = r#"(
            name: "branches",
            mechanisms: [(id: "c", kind: "status_channel")],
            processes: [(id: 0, program: [
                IfStatus(mech: "c", full: [Read(mech: "c", bind: "x")], empty: []),
                Write(mech: "c", value: Var("x")),
            ])],
        )"#;
        assert!(issues(doc)[0].message.contains("\"x\" used before"));
    }

    #[test]
    fn select_branches_need_distinct_heads() {
        let doc = r#"(
            name: "select",
            mechanisms: [(id: "c", kind: "message_cell")],
            processes: [(id: 0, program: [Select(branches: [
                [Read(mech: "c", bind: "x")],
                [Read(mech: "c", bind: "y")],
                [Skip],
            ])])],
        )"#;
        let found = issues(doc);
        assert_eq!(found.len(), 2, "{found:?}");
    }

    #[test]
    fn empty_cannot_be_written_to_status_channels() {
        let doc = MINIMAL.replace("Lit([1, 2])", "Empty");
        assert!(issues(&doc)[0].message.contains("empty indicator"));
    }
}
