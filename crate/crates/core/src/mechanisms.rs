//! Guarded state machines for each communication mechanism.
//!
//! Every operation returns `None` when its guard does not hold. A disabled
//! action is simply absent from the set of steps the kernel offers, so a
//! process waiting on a guard is blocked rather than failing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::{show_msg, Msg, ProcessId, UpdateFn, Value, Word};

/// Whether a locked cell's words can be touched without holding the lock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LockMode {
    /// Lock discipline is voluntary; any process may access the words.
    Undisciplined,
    /// Words are reachable only through the lock holder.
    Encapsulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelStatus {
    Empty,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DuplexStatus {
    Empty,
    FullForA,
    FullForB,
}

/// What a status check reports, seen from the checking process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatusView {
    /// Nothing is waiting.
    Empty,
    /// A message is waiting for the checker.
    Readable,
    /// A message is waiting for the other side of a duplex channel.
    Pending,
}

impl StatusView {
    /// Word code stored in a local variable by a `check` step.
    pub fn code(self) -> Word {
        match self {
            StatusView::Empty => 0,
            StatusView::Readable => 1,
            StatusView::Pending => 2,
        }
    }
}

/// Unprotected word-divisible location.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawCell {
    pub words: Vec<Word>,
}

impl RawCell {
    pub fn read_word(&self, index: usize) -> Word {
        self.words[index]
    }

    pub fn write_word(&self, index: usize, word: Word) -> Self {
        let mut words = self.words.clone();
        words[index] = word;
        RawCell { words }
    }
}

/// Location guarded by a lock/unlock pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LockedCell {
    pub owner: Option<ProcessId>,
    pub words: Vec<Word>,
    pub mode: LockMode,
}

impl LockedCell {
    pub fn new(words: Vec<Word>, mode: LockMode) -> Self {
        LockedCell { owner: None, words, mode }
    }

    pub fn lock(&self, p: ProcessId) -> Option<Self> {
        self.owner.is_none().then(|| LockedCell { owner: Some(p), ..self.clone() })
    }

    pub fn unlock(&self, p: ProcessId) -> Option<Self> {
        (self.owner == Some(p)).then(|| LockedCell { owner: None, ..self.clone() })
    }

    fn accessible_by(&self, p: ProcessId) -> bool {
        match self.mode {
            LockMode::Undisciplined => true,
            LockMode::Encapsulated => self.owner == Some(p),
        }
    }

    pub fn read_word(&self, p: ProcessId, index: usize) -> Option<Word> {
        self.accessible_by(p).then(|| self.words[index])
    }

    pub fn write_word(&self, p: ProcessId, index: usize, word: Word) -> Option<Self> {
        self.accessible_by(p).then(|| {
            let mut next = self.clone();
            next.words[index] = word;
            next
        })
    }
}

/// Whole-value atomic read and write with no ordering constraints.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MessageCell {
    pub content: Msg,
}

impl MessageCell {
    /// Overwrites whatever is stored.
    pub fn write(&self, msg: Msg) -> Self {
        MessageCell { content: msg }
    }

    /// Non-destructive; `None` is the empty indicator.
    pub fn read(&self) -> Msg {
        self.content.clone()
    }
}

/// Single-slot channel: write needs Empty, read needs Full.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatusChannel {
    pub status: ChannelStatus,
    pub content: Msg,
}

impl Default for StatusChannel {
    fn default() -> Self {
        StatusChannel { status: ChannelStatus::Empty, content: None }
    }
}

impl StatusChannel {
    pub fn write(&self, value: Value) -> Option<Self> {
        (self.status == ChannelStatus::Empty)
            .then_some(StatusChannel { status: ChannelStatus::Full, content: Some(value) })
    }

    pub fn read(&self) -> Option<(Self, Value)> {
        match (self.status, &self.content) {
            (ChannelStatus::Full, Some(v)) => Some((StatusChannel::default(), v.clone())),
            _ => None,
        }
    }

    pub fn check(&self) -> StatusView {
        match self.status {
            ChannelStatus::Empty => StatusView::Empty,
            ChannelStatus::Full => StatusView::Readable,
        }
    }
}

/// One location shared by both directions between two fixed sides.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DuplexChannel {
    pub status: DuplexStatus,
    pub content: Msg,
    pub side_a: ProcessId,
    pub side_b: ProcessId,
    /// When set, a side may overwrite its own unread outgoing message.
    pub last_message: bool,
}

impl DuplexChannel {
    pub fn new(side_a: ProcessId, side_b: ProcessId, last_message: bool) -> Self {
        DuplexChannel { status: DuplexStatus::Empty, content: None, side_a, side_b, last_message }
    }

    /// Status meaning "a message is waiting for `p`"; `None` if `p` is not a side.
    fn full_for(&self, p: ProcessId) -> Option<DuplexStatus> {
        if p == self.side_a {
            Some(DuplexStatus::FullForA)
        } else if p == self.side_b {
            Some(DuplexStatus::FullForB)
        } else {
            None
        }
    }

    fn peer_of(&self, p: ProcessId) -> Option<DuplexStatus> {
        if p == self.side_a {
            Some(DuplexStatus::FullForB)
        } else if p == self.side_b {
            Some(DuplexStatus::FullForA)
        } else {
            None
        }
    }

    pub fn write(&self, p: ProcessId, value: Value) -> Option<Self> {
        let mine = self.full_for(p)?;
        let outgoing = self.peer_of(p)?;
        let allowed = if self.last_message {
            self.status != mine
        } else {
            self.status == DuplexStatus::Empty
        };
        allowed.then(|| DuplexChannel { status: outgoing, content: Some(value), ..self.clone() })
    }

    pub fn read(&self, p: ProcessId) -> Option<(Self, Value)> {
        let mine = self.full_for(p)?;
        if self.status != mine {
            return None;
        }
        let value = self.content.clone()?;
        Some((DuplexChannel { status: DuplexStatus::Empty, content: None, ..self.clone() }, value))
    }

    pub fn check(&self, p: ProcessId) -> Option<StatusView> {
        let mine = self.full_for(p)?;
        Some(match self.status {
            DuplexStatus::Empty => StatusView::Empty,
            s if s == mine => StatusView::Readable,
            _ => StatusView::Pending,
        })
    }
}

/// Channel where the writer never waits and the reader sees only the latest value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LastMessageChannel {
    pub status: ChannelStatus,
    pub content: Msg,
}

impl Default for LastMessageChannel {
    fn default() -> Self {
        LastMessageChannel { status: ChannelStatus::Empty, content: None }
    }
}

impl LastMessageChannel {
    pub fn write(&self, value: Value) -> Self {
        LastMessageChannel { status: ChannelStatus::Full, content: Some(value) }
    }

    /// Destructive: Full means an unseen message exists.
    pub fn read(&self) -> Option<(Self, Value)> {
        match (self.status, &self.content) {
            (ChannelStatus::Full, Some(v)) => Some((LastMessageChannel::default(), v.clone())),
            _ => None,
        }
    }

    pub fn check(&self) -> StatusView {
        match self.status {
            ChannelStatus::Empty => StatusView::Empty,
            ChannelStatus::Full => StatusView::Readable,
        }
    }
}

/// Location every party reads and writes at will, with an optional lock and an
/// atomic read-modify-write.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SharedRegister {
    pub content: Value,
    pub owner: Option<ProcessId>,
}

impl SharedRegister {
    pub fn new(content: Value) -> Self {
        SharedRegister { content, owner: None }
    }

    fn free_for(&self, p: ProcessId) -> bool {
        self.owner.is_none() || self.owner == Some(p)
    }

    pub fn lock(&self, p: ProcessId) -> Option<Self> {
        self.owner.is_none().then(|| SharedRegister { owner: Some(p), ..self.clone() })
    }

    pub fn unlock(&self, p: ProcessId) -> Option<Self> {
        (self.owner == Some(p)).then(|| SharedRegister { owner: None, ..self.clone() })
    }

    pub fn read(&self, p: ProcessId) -> Option<Value> {
        self.free_for(p).then(|| self.content.clone())
    }

    pub fn write(&self, p: ProcessId, value: Value) -> Option<Self> {
        self.free_for(p).then(|| SharedRegister { content: value, ..self.clone() })
    }

    /// Read, generate and write as one indivisible step.
    pub fn update(&self, p: ProcessId, f: UpdateFn) -> Option<Self> {
        self.free_for(p).then(|| SharedRegister { content: f.apply(&self.content), ..self.clone() })
    }
}

/// Runtime state of one mechanism instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MechanismState {
    RawCell(RawCell),
    LockedCell(LockedCell),
    MessageCell(MessageCell),
    StatusChannel(StatusChannel),
    DuplexChannel(DuplexChannel),
    LastMessageChannel(LastMessageChannel),
    SharedRegister(SharedRegister),
    /// Rendezvous channel; stateless, pairing is done by the kernel.
    DirectChannel,
}

/// A single-process access to a mechanism. Rendezvous send/receive are not
/// accesses; the kernel pairs them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Access {
    Lock,
    Unlock,
    ReadWord(usize),
    WriteWord(usize, Word),
    Read,
    Write(Msg),
    Check,
    Update(UpdateFn),
}

/// Result handed back to the accessing process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Word(Word),
    Msg(Msg),
    Status(StatusView),
}

impl MechanismState {
    pub fn kind_name(&self) -> &'static str {
        match self {
            MechanismState::RawCell(_) => "raw_cell",
            MechanismState::LockedCell(_) => "locked_cell",
            MechanismState::MessageCell(_) => "message_cell",
            MechanismState::StatusChannel(_) => "status_channel",
            MechanismState::DuplexChannel(_) => "duplex_channel",
            MechanismState::LastMessageChannel(_) => "last_message_channel",
            MechanismState::SharedRegister(_) => "shared_register",
            MechanismState::DirectChannel => "direct_channel",
        }
    }

    /// Current lock holder, for mechanisms that have one.
    pub fn owner(&self) -> Option<ProcessId> {
        match self {
            MechanismState::LockedCell(c) => c.owner,
            MechanismState::SharedRegister(r) => r.owner,
            _ => None,
        }
    }

    /// Whether `access` is part of this mechanism's interface at all,
    /// independent of the current state.
    pub fn supports(&self, access: &Access) -> bool {
        use Access::*;
        matches!(
            (self, access),
            (MechanismState::RawCell(_), ReadWord(_) | WriteWord(..))
                | (MechanismState::LockedCell(_), Lock | Unlock | ReadWord(_) | WriteWord(..))
                | (MechanismState::MessageCell(_), Read | Write(_))
                | (MechanismState::StatusChannel(_), Read | Write(_) | Check)
                | (MechanismState::DuplexChannel(_), Read | Write(_) | Check)
                | (MechanismState::LastMessageChannel(_), Read | Write(_) | Check)
                | (MechanismState::SharedRegister(_), Lock | Unlock | Read | Write(_) | Update(_))
        )
    }

    /// Applies `access` by `p`; `None` when the guard forbids it.
    pub fn apply(&self, p: ProcessId, access: &Access) -> Option<(MechanismState, Outcome)> {
        use MechanismState as M;
        match (self, access) {
            (M::RawCell(c), Access::ReadWord(i)) => Some((self.clone(), Outcome::Word(c.read_word(*i)))),
            (M::RawCell(c), Access::WriteWord(i, w)) => {
                Some((M::RawCell(c.write_word(*i, *w)), Outcome::Done))
            }

            (M::LockedCell(c), Access::Lock) => c.lock(p).map(|c| (M::LockedCell(c), Outcome::Done)),
            (M::LockedCell(c), Access::Unlock) => c.unlock(p).map(|c| (M::LockedCell(c), Outcome::Done)),
            (M::LockedCell(c), Access::ReadWord(i)) => {
                c.read_word(p, *i).map(|w| (self.clone(), Outcome::Word(w)))
            }
            (M::LockedCell(c), Access::WriteWord(i, w)) => {
                c.write_word(p, *i, *w).map(|c| (M::LockedCell(c), Outcome::Done))
            }

            (M::MessageCell(c), Access::Read) => Some((self.clone(), Outcome::Msg(c.read()))),
            (M::MessageCell(c), Access::Write(msg)) => {
                Some((M::MessageCell(c.write(msg.clone())), Outcome::Done))
            }

            (M::StatusChannel(c), Access::Write(Some(v))) => {
                c.write(v.clone()).map(|c| (M::StatusChannel(c), Outcome::Done))
            }
            (M::StatusChannel(c), Access::Read) => {
                c.read().map(|(c, v)| (M::StatusChannel(c), Outcome::Msg(Some(v))))
            }
            (M::StatusChannel(c), Access::Check) => Some((self.clone(), Outcome::Status(c.check()))),

            (M::DuplexChannel(c), Access::Write(Some(v))) => {
                c.write(p, v.clone()).map(|c| (M::DuplexChannel(c), Outcome::Done))
            }
            (M::DuplexChannel(c), Access::Read) => {
                c.read(p).map(|(c, v)| (M::DuplexChannel(c), Outcome::Msg(Some(v))))
            }
            (M::DuplexChannel(c), Access::Check) => {
                c.check(p).map(|s| (self.clone(), Outcome::Status(s)))
            }

            (M::LastMessageChannel(c), Access::Write(Some(v))) => {
                Some((M::LastMessageChannel(c.write(v.clone())), Outcome::Done))
            }
            (M::LastMessageChannel(c), Access::Read) => {
                c.read().map(|(c, v)| (M::LastMessageChannel(c), Outcome::Msg(Some(v))))
            }
            (M::LastMessageChannel(c), Access::Check) => {
                Some((self.clone(), Outcome::Status(c.check())))
            }

            (M::SharedRegister(r), Access::Lock) => r.lock(p).map(|r| (M::SharedRegister(r), Outcome::Done)),
            (M::SharedRegister(r), Access::Unlock) => {
                r.unlock(p).map(|r| (M::SharedRegister(r), Outcome::Done))
            }
            (M::SharedRegister(r), Access::Read) => r.read(p).map(|v| (self.clone(), Outcome::Msg(Some(v)))),
            (M::SharedRegister(r), Access::Write(Some(v))) => {
                r.write(p, v.clone()).map(|r| (M::SharedRegister(r), Outcome::Done))
            }
            (M::SharedRegister(r), Access::Update(f)) => {
                r.update(p, *f).map(|r| (M::SharedRegister(r), Outcome::Done))
            }

            _ => None,
        }
    }
}

impl fmt::Display for MechanismState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn owner(o: &Option<ProcessId>) -> String {
            o.map_or_else(|| "none".to_string(), |p| p.to_string())
        }
        fn words(w: &[Word]) -> String {
            Value::new(w.to_vec()).map_or_else(|| format!("{w:?}"), |v| v.to_string())
        }
        match self {
            MechanismState::RawCell(c) => write!(f, "raw {}", words(&c.words)),
            MechanismState::LockedCell(c) => {
                write!(f, "locked owner={} {}", owner(&c.owner), words(&c.words))
            }
            MechanismState::MessageCell(c) => write!(f, "cell {}", show_msg(&c.content)),
            MechanismState::StatusChannel(c) => write!(f, "status {:?} {}", c.status, show_msg(&c.content)),
            MechanismState::DuplexChannel(c) => write!(f, "duplex {:?} {}", c.status, show_msg(&c.content)),
            MechanismState::LastMessageChannel(c) => {
                write!(f, "last-message {:?} {}", c.status, show_msg(&c.content))
            }
            MechanismState::SharedRegister(r) => {
                write!(f, "register owner={} {}", owner(&r.owner), r.content)
            }
            MechanismState::DirectChannel => f.write_str("direct"),
        }
    }
}
