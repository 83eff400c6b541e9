//! Core protocol types shared by all three variants.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Servers are numbered `1..=n`.
pub type ServerId = u32;
pub type Term = u64;
pub type LogIndex = u64;

/// Simulated time in integer microseconds. All protocol periods and network
/// delays are whole microseconds so event ordering never depends on float
/// rounding.
pub type Micros = u64;

/// Milliseconds to simulated microseconds.
pub const fn ms(v: u64) -> Micros {
    v * 1_000
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Raft,
    ZRaft,
    Escape,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Raft => "raft",
            Variant::ZRaft => "z-raft",
            Variant::Escape => "escape",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raft" => Ok(Variant::Raft),
            "z-raft" | "zraft" => Ok(Variant::ZRaft),
            "escape" => Ok(Variant::Escape),
            other => Err(format!(
                "unknown variant {other:?} (expected raft, z-raft or escape)"
            )),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Follower,
    Candidate,
    Leader,
}

/// A priority configuration as assigned to one server: the priority itself,
/// the election-timer period derived from it, and the assignment clock that
/// versions the assignment it came from.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Configuration {
    pub priority: u32,
    pub timer_period: Micros,
    pub conf_clock: u64,
}

/// Static protocol parameters, fixed for the lifetime of a cluster.
#[derive(Clone, Debug)]
pub struct ProtocolParams {
    pub variant: Variant,
    /// Cluster size.
    pub n: u32,
    /// Base election timeout (the timeout of the highest priority).
    pub base_time: Micros,
    /// Per-priority-step increment of the election timeout.
    pub k: Micros,
    /// Raft samples its election timeout uniformly from this inclusive range
    /// on every timer reset.
    pub raft_timeout_range: (Micros, Micros),
    pub heartbeat_interval: Micros,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("priority {priority} outside 1..={n}")]
    InvalidPriority { priority: u32, n: u32 },
    #[error("a leader cannot start an election")]
    LeaderCampaign,
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let err = |m: String| Err(ProtocolError::InvalidParams(m));
        if self.n == 0 {
            return err("cluster size must be at least 1".into());
        }
        if self.base_time == 0 {
            return err("base election timeout must be positive".into());
        }
        let (lo, hi) = self.raft_timeout_range;
        if lo == 0 || lo > hi {
            return err(format!("bad timeout range [{lo}, {hi}]"));
        }
        // A heartbeat period at or above the shortest possible election
        // timeout would let healthy followers time out between beats.
        let min_timeout = match self.variant {
            Variant::Raft => lo,
            Variant::ZRaft | Variant::Escape => self.base_time,
        };
        if self.heartbeat_interval == 0 || self.heartbeat_interval >= min_timeout {
            return err(format!(
                "heartbeat interval {} must be positive and below the minimum election timeout {}",
                self.heartbeat_interval, min_timeout
            ));
        }
        Ok(())
    }

    pub fn quorum(&self) -> usize {
        self.n as usize / 2 + 1
    }

    /// Election-timer period for a priority: `base_time + k * (n - priority)`.
    /// The highest priority `n` gets the shortest timeout, `base_time`.
    pub fn election_timeout(&self, priority: u32) -> Result<Micros, ProtocolError> {
        if priority == 0 || priority > self.n {
            return Err(ProtocolError::InvalidPriority { priority, n: self.n });
        }
        Ok(self.base_time + self.k * (self.n - priority) as Micros)
    }

    /// Raft's randomized timeout: uniform over the inclusive configured
    /// range. A degenerate range `[t, t]` always yields `t`.
    pub fn sample_raft_timeout(&self, rng: &mut impl Rng) -> Micros {
        let (lo, hi) = self.raft_timeout_range;
        rng.gen_range(lo..=hi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub index: LogIndex,
    pub term: Term,
    pub payload: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RequestVoteArgs {
    pub term: Term,
    pub candidate: ServerId,
    pub last_log_index: LogIndex,
    pub last_log_term: Term,
    /// Assignment clock of the candidate's configuration. Escape voters
    /// refuse candidates whose clock is behind their own; Raft and Z-Raft
    /// always carry 0 and ignore it.
    pub conf_clock: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RequestVoteReply {
    pub term: Term,
    pub vote_granted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppendEntriesArgs {
    pub term: Term,
    pub leader: ServerId,
    pub prev_log_index: LogIndex,
    pub prev_log_term: Term,
    pub entries: Vec<LogEntry>,
    pub leader_commit: LogIndex,
    /// Escape piggybacks the recipient's current configuration assignment on
    /// every append; absent for Raft and Z-Raft.
    pub new_config: Option<Configuration>,
}

/// Follower status echoed on every append reply, successful or not: the
/// follower's last log index and the timer period it currently runs with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FollowerStatus {
    pub log_index: LogIndex,
    pub timer_period: Micros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AppendEntriesReply {
    pub term: Term,
    pub success: bool,
    pub status: FollowerStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    RequestVote(RequestVoteArgs),
    RequestVoteReply(RequestVoteReply),
    AppendEntries(AppendEntriesArgs),
    AppendEntriesReply(AppendEntriesReply),
}
