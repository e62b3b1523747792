//! The append-only event log and its newline-delimited JSON encoding.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::personas::Persona;
use crate::topic::Topic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

/// Posts and comments share one identifier space so a parent reference is
/// never ambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Join,
    Churn,
    Activate,
    Post,
    Comment,
    Read,
    Search,
    Follow,
    MentionReply,
    Interest,
    Degraded,
}

impl EventKind {
    /// Kinds that count as an agent "doing something" on a day.
    pub fn is_action(self) -> bool {
        matches!(
            self,
            EventKind::Post
                | EventKind::Comment
                | EventKind::MentionReply
                | EventKind::Read
                | EventKind::Search
        )
    }

    pub fn is_comment(self) -> bool {
        matches!(self, EventKind::Comment | EventKind::MentionReply)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub seq: u64,
    pub day: u32,
    pub round: u32,
    #[serde(rename = "type")]
    pub kind: EventKind,
    pub agent: AgentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_id: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_id: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_id: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followee: Option<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topics: Vec<Topic>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<AgentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<Persona>,
}

impl EventRecord {
    pub fn new(seq: u64, day: u32, round: u32, kind: EventKind, agent: AgentId) -> Self {
        Self {
            seq,
            day,
            round,
            kind,
            agent,
            post_id: None,
            comment_id: None,
            parent_id: None,
            root_id: None,
            followee: None,
            title: None,
            text: None,
            url: None,
            topics: Vec::new(),
            mentions: Vec::new(),
            persona: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EventLogError {
    #[error("I/O error reading event log: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt event at line {line} (expected seq {expected_seq}): {message}")]
    Corrupt {
        line: usize,
        expected_seq: u64,
        message: String,
    },
}

impl EventLogError {
    pub fn expected_seq(&self) -> Option<u64> {
        match self {
            EventLogError::Corrupt { expected_seq, .. } => Some(*expected_seq),
            EventLogError::Io(_) => None,
        }
    }
}

pub fn write_events<W: Write>(mut out: W, events: &[EventRecord]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses a newline-delimited log. Blank lines are skipped; sequence numbers
/// must run 1, 2, 3, ... without gaps.
pub fn read_events<R: BufRead>(input: R) -> Result<Vec<EventRecord>, EventLogError> {
    let mut events: Vec<EventRecord> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let expected_seq = events.last().map_or(1, |e| e.seq + 1);
        let corrupt = |message: String| EventLogError::Corrupt {
            line: idx + 1,
            expected_seq,
            message,
        };
        let event: EventRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        if event.seq != expected_seq {
            return Err(corrupt(format!("found seq {}", event.seq)));
        }
        if let Some(prev) = events.last() {
            if (event.day, event.round) < (prev.day, prev.round) {
                return Err(corrupt("clock moved backwards".to_string()));
            }
        }
        events.push(event);
    }
    Ok(events)
}
