//! Message values, process identities and the built-in update functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One word of a message. Words live in `0..WORD_LIMIT`.
pub type Word = u8;

/// Exclusive upper bound of the word domain.
pub const WORD_LIMIT: Word = 8;

/// Default number of words per value.
pub const DEFAULT_WORD_WIDTH: usize = 2;

/// Largest supported word width.
pub const MAX_WORD_WIDTH: usize = 4;

/// Identity of one concurrent process. Ids are dense `0..P` within a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u16);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A multi-word message. Word-wise access to a location is what makes reads and
/// writes divisible.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Value(Vec<Word>);

impl Value {
    /// Builds a value, rejecting words outside the domain.
    pub fn new(words: Vec<Word>) -> Option<Self> {
        words.iter().all(|w| *w < WORD_LIMIT).then_some(Value(words))
    }

    pub fn zero(width: usize) -> Self {
        Value(vec![0; width])
    }

    pub fn words(&self) -> &[Word] {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn word(&self, index: usize) -> Word {
        self.0[index]
    }

    pub fn with_word(&self, index: usize, word: Word) -> Self {
        let mut words = self.0.clone();
        words[index] = word % WORD_LIMIT;
        Value(words)
    }

    /// Applies `f` to every word, wrapping into the word domain.
    pub fn map(&self, f: impl Fn(Word) -> u32) -> Self {
        Value(self.0.iter().map(|w| (f(*w) % WORD_LIMIT as u32) as Word).collect())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        f.write_str(")")
    }
}

/// A value or the distinguished empty indicator.
pub type Msg = Option<Value>;

/// Formats a possibly-empty message.
pub fn show_msg(msg: &Msg) -> String {
    match msg {
        Some(v) => v.to_string(),
        None => "empty".to_string(),
    }
}

/// Built-in functions used by atomic register updates and local computation.
/// All of them act per word, modulo the word domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum UpdateFn {
    Inc,
    Add(Word),
    Double,
}

impl UpdateFn {
    pub fn apply(self, value: &Value) -> Value {
        match self {
            UpdateFn::Inc => value.map(|w| w as u32 + 1),
            UpdateFn::Add(k) => value.map(|w| w as u32 + k as u32),
            UpdateFn::Double => value.map(|w| w as u32 * 2),
        }
    }
}

impl fmt::Display for UpdateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateFn::Inc => f.write_str("inc"),
            UpdateFn::Add(k) => write!(f, "add({k})"),
            UpdateFn::Double => f.write_str("double"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown update function `{0}` (expected inc, double or add(k) with k in 0..8)")]
pub struct UnknownFunction(pub String);

impl FromStr for UpdateFn {
    type Err = UnknownFunction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "inc" => return Ok(UpdateFn::Inc),
            "double" => return Ok(UpdateFn::Double),
            _ => {}
        }
        s.strip_prefix("add(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|k| k.trim().parse::<Word>().ok())
            .filter(|k| *k < WORD_LIMIT)
            .map(UpdateFn::Add)
            .ok_or_else(|| UnknownFunction(s.to_string()))
    }
}

impl From<UpdateFn> for String {
    fn from(f: UpdateFn) -> String {
        f.to_string()
    }
}

impl TryFrom<String> for UpdateFn {
    type Error = UnknownFunction;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_functions_wrap_per_word() {
        let v = Value::new(vec![3, 7]).unwrap();
        assert_eq!(UpdateFn::Inc.apply(&v).words(), &[4, 0]);
        assert_eq!(UpdateFn::Add(5).apply(&v).words(), &[0, 4]);
        assert_eq!(UpdateFn::Double.apply(&v).words(), &[6, 6]);
    }

    #[test]
    fn function_names_parse() {
        assert_eq!("inc".parse::<UpdateFn>().unwrap(), UpdateFn::Inc);
        assert_eq!("add(3)".parse::<UpdateFn>().unwrap(), UpdateFn::Add(3));
        assert_eq!("double".parse::<UpdateFn>().unwrap(), UpdateFn::Double);
        assert!("add(9)".parse::<UpdateFn>().is_err());
        assert!("square".parse::<UpdateFn>().is_err());
        for f in [UpdateFn::Inc, UpdateFn::Add(2), UpdateFn::Double] {
            assert_eq!(f.to_string().parse::<UpdateFn>().unwrap(), f);
        }
    }

    #[test]
    fn words_outside_domain_rejected() {
        assert!(Value::new(vec![8]).is_none());
        assert_eq!(Value::new(vec![1, 2]).unwrap().to_string(), "(1,2)");
    }
}
