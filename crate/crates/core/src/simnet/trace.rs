//! The simulation trace: a flat, append-only record of everything observable
//! that happened in a run. Metrics and invariant checks are computed from the
//! trace alone, never from live simulator state, so a trace on disk carries
//! exactly as much information as the run itself.
//!
//! Serialized form is line-delimited JSON, one event per line, with a `kind`
//! tag. Two runs are equivalent iff their serialized traces are byte-equal.

use serde::{Deserialize, Serialize};

use crate::protocol::{DenyReason, LogIndex, Message, Micros, Role, ServerId, Term};

/// Wire-level message class, for message records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgKind {
    RequestVote,
    RequestVoteReply,
    AppendEntries,
    AppendEntriesReply,
}

/// Why a message never reached its recipient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    /// Dropped by the lossy network at send time.
    Loss,
    /// The recipient was crashed at delivery time.
    Crashed,
}

/// Compact description of a message, embedded in send/deliver/drop records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MsgSummary {
    pub msg: MsgKind,
    /// Protocol term carried by the message.
    pub term: Term,
    /// For vote replies: the term of the request being answered. A denial
    /// may carry a newer `term` than the campaign it answers.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answers_term: Option<Term>,
    /// For append replies: the configuration clock the follower's state
    /// reflected when it answered.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub answers_clock: Option<u64>,
}

impl MsgSummary {
    /// Summary of an outbound request (broadcast leg).
    pub fn of(msg: &Message) -> Self {
        let (kind, term) = match msg {
            Message::RequestVote(a) => (MsgKind::RequestVote, a.term),
            Message::RequestVoteReply(r) => (MsgKind::RequestVoteReply, r.term),
            Message::AppendEntries(a) => (MsgKind::AppendEntries, a.term),
            Message::AppendEntriesReply(r) => (MsgKind::AppendEntriesReply, r.term),
        };
        MsgSummary {
            msg: kind,
            term,
            answers_term: None,
            answers_clock: None,
        }
    }
}

/// One observable simulation event. `at` is simulated time in microseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    TermChanged {
        at: Micros,
        server: ServerId,
        term: Term,
    },
    RoleChanged {
        at: Micros,
        server: ServerId,
        role: Role,
        term: Term,
    },
    CampaignStarted {
        at: Micros,
        server: ServerId,
        term: Term,
        priority: u32,
    },
    VoteGranted {
        at: Micros,
        server: ServerId,
        candidate: ServerId,
        term: Term,
    },
    VoteDenied {
        at: Micros,
        server: ServerId,
        candidate: ServerId,
        term: Term,
        reason: DenyReason,
    },
    ConfigAdopted {
        at: Micros,
        server: ServerId,
        priority: u32,
        timer_period: Micros,
        conf_clock: u64,
    },
    LogTruncated {
        at: Micros,
        server: ServerId,
        from_index: LogIndex,
    },
    EntryAppended {
        at: Micros,
        server: ServerId,
        index: LogIndex,
        term: Term,
    },
    CommitAdvanced {
        at: Micros,
        server: ServerId,
        commit_index: LogIndex,
    },
    MsgSent {
        at: Micros,
        from: ServerId,
        to: ServerId,
        #[serde(flatten)]
        summary: MsgSummary,
    },
    MsgDelivered {
        at: Micros,
        from: ServerId,
        to: ServerId,
        sent_at: Micros,
        #[serde(flatten)]
        summary: MsgSummary,
    },
    MsgDropped {
        at: Micros,
        from: ServerId,
        to: ServerId,
        cause: DropCause,
        #[serde(flatten)]
        summary: MsgSummary,
    },
    Crashed {
        at: Micros,
        server: ServerId,
    },
    Recovered {
        at: Micros,
        server: ServerId,
    },
}

impl Event {
    pub fn at(&self) -> Micros {
        match self {
            Event::TermChanged { at, .. }
            | Event::RoleChanged { at, .. }
            | Event::CampaignStarted { at, .. }
            | Event::VoteGranted { at, .. }
            | Event::VoteDenied { at, .. }
            | Event::ConfigAdopted { at, .. }
            | Event::LogTruncated { at, .. }
            | Event::EntryAppended { at, .. }
            | Event::CommitAdvanced { at, .. }
            | Event::MsgSent { at, .. }
            | Event::MsgDelivered { at, .. }
            | Event::MsgDropped { at, .. }
            | Event::Crashed { at, .. }
            | Event::Recovered { at, .. } => *at,
        }
    }
}

/// The complete event record of one run, in emission order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<Event>,
}

impl Trace {
    pub fn push(&mut self, ev: Event) {
        self.events.push(ev);
    }

    /// Line-delimited JSON, one event per line, trailing newline.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&serde_json::to_string(ev).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let mut events = Vec::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(line)?);
        }
        Ok(Trace { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_round_trip_through_ndjson() {
        let mut t = Trace::default();
        t.push(Event::CampaignStarted {
            at: 1_500_000,
            server: 5,
            term: 5,
            priority: 5,
        });
        t.push(Event::VoteDenied {
            at: 1_600_123,
            server: 2,
            candidate: 4,
            term: 7,
            reason: DenyReason::StaleClock,
        });
        t.push(Event::MsgDropped {
            at: 2_000_000,
            from: 1,
            to: 3,
            cause: DropCause::Loss,
            summary: MsgSummary {
                msg: MsgKind::AppendEntries,
                term: 3,
                answers_term: None,
                answers_clock: None,
            },
        });
        let text = t.to_ndjson();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(Trace::from_ndjson(&text).unwrap(), t);
    }

    #[test]
    fn serialized_form_is_tagged_snake_case() {
        let ev = Event::ConfigAdopted {
            at: 42,
            server: 3,
            priority: 4,
            timer_period: 2_000_000,
            conf_clock: 7,
        };
        let line = serde_json::to_string(&ev).unwrap();
        assert_eq!(
            line,
            "{\"kind\":\"config_adopted\",\"at\":42,\"server\":3,\
             \"priority\":4,\"timer_period\":2000000,\"conf_clock\":7}"
        );
    }

    #[test]
    fn reply_summaries_carry_answer_metadata() {
        let ev = Event::MsgDelivered {
            at: 100,
            from: 2,
            to: 1,
            sent_at: 50,
            summary: MsgSummary {
                msg: MsgKind::AppendEntriesReply,
                term: 9,
                answers_term: None,
                answers_clock: Some(4),
            },
        };
        let line = serde_json::to_string(&ev).unwrap();
        assert!(line.contains("\"answers_clock\":4"));
        assert!(!line.contains("answers_term"));
        let back: Event = serde_json::from_str(&line).unwrap();
        assert_eq!(back, ev);
    }
}
