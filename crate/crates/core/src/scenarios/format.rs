//! Serialized form of a scenario document.
//!
//! Documents are RON. Names (mechanism kinds, update functions, variables) stay
//! strings here so that the loader can report unknown ones with their position
//! instead of failing inside the parser.

use serde::{Deserialize, Serialize};

use crate::explorer::Bounds;
use crate::value::Word;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default = "default_word_width")]
    pub word_width: usize,
    pub mechanisms: Vec<MechanismDoc>,
    pub processes: Vec<ProcessDoc>,
    #[serde(default)]
    pub monitors: Vec<MonitorDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
}

fn default_word_width() -> usize {
    crate::value::DEFAULT_WORD_WIDTH
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismDoc {
    pub id: String,
    /// One of `raw_cell`, `locked_cell`, `message_cell`, `status_channel`,
    /// `duplex_channel`, `last_message_channel`, `shared_register`, `direct_channel`.
    pub kind: String,
    /// `locked_cell` only: `undisciplined` or `encapsulated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_a: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_b: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_message: Option<bool>,
    /// Initial words for cells and registers; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Word>>,
}

impl MechanismDoc {
    pub fn new(id: &str, kind: &str) -> Self {
        MechanismDoc {
            id: id.to_string(),
            kind: kind.to_string(),
            mode: None,
            side_a: None,
            side_b: None,
            last_message: None,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessDoc {
    pub id: u16,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub program: Vec<Step>,
}

/// Literal value, a bound variable, or the empty indicator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueExpr {
    Lit(Vec<Word>),
    Var(String),
    Empty,
}

/// Literal word, or the word at the written index of a bound variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WordExpr {
    Lit(Word),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Write { mech: String, value: ValueExpr },
    Read { mech: String, bind: String },
    Send { mech: String, value: ValueExpr },
    Receive { mech: String, bind: String },
    Lock { mech: String },
    Unlock { mech: String },
    /// Reads one word; with `bind`, stores it at the same index of the variable.
    ReadWord {
        mech: String,
        index: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bind: Option<String>,
    },
    WriteWord { mech: String, index: usize, word: WordExpr },
    /// Binds the status code (0 empty, 1 readable, 2 pending for the peer).
    Check { mech: String, bind: String },
    Update { mech: String, function: String },
    Loop { count: u32, body: Vec<Step> },
    /// One status check, then `full` if a message is waiting for this process.
    IfStatus { mech: String, full: Vec<Step>, empty: Vec<Step> },
    /// One word read, then `then` if it equals `word`.
    IfWord { mech: String, index: usize, word: Word, then: Vec<Step>, otherwise: Vec<Step> },
    /// Re-reads the word and runs `body` for as long as it equals `word`.
    WhileWord { mech: String, index: usize, word: Word, body: Vec<Step> },
    /// Takes whichever branch's first action becomes enabled.
    Select { branches: Vec<Vec<Step>> },
    /// Marks `body` as a named critical section.
    Critical { section: String, body: Vec<Step> },
    AssertLocal { var: String, value: ValueExpr },
    Local { var: String, value: ValueExpr },
    /// Applies a built-in function to a bound variable.
    Compute { var: String, function: String },
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonitorDoc {
    /// At most one process inside the named critical section.
    MutualExclusion { section: String },
    /// Received values form a prefix of the sent values; equal at termination.
    SentReceivedOrder { mech: String },
    /// Each read returns the latest write, so receipts are a subsequence of sends.
    Subsequence { mech: String },
    /// Word-wise reads must assemble one of `values` or the initial content.
    TornValue { mech: String, values: Vec<Vec<Word>> },
    /// No side reads back its own message.
    RecipientTag { mech: String },
    TerminalAssert { process: u16, var: String, expected: ValueExpr },
    /// No write destroys a message nobody has read.
    LostUnread { mech: String },
}
