//! Leader-side priority patrol.
//!
//! An Escape leader watches how promptly each follower answers its
//! heartbeats and which log index those answers report, then hands out a
//! fresh set of prioritized configurations every heartbeat round: the most
//! up-to-date followers get the highest priorities (and thus the shortest
//! election timers). The leader keeps its own pre-election priority out of
//! the pool, so every round's assignment is a bijection between followers
//! and the remaining priorities, all stamped with the same, strictly
//! increasing assignment clock.

use std::collections::BTreeMap;

use crate::protocol::{
    Configuration, FollowerStatus, LogIndex, ProtocolParams, ServerId,
};

#[derive(thiserror::Error, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatrolError {
    #[error("server {0} has no configuration in the current assignment")]
    NoAssignment(ServerId),
}

/// What the leader knows about one follower's responsiveness.
#[derive(Clone, Copy, Debug, Default)]
pub struct FollowerRecord {
    /// Last log index the follower reported in an accepted reply.
    pub log_index: LogIndex,
    /// Assignment clock of the freshest round the follower has answered.
    pub reply_clock: u64,
    /// False until the first reply; never-responders rank below everyone.
    pub responded: bool,
}

/// One round's complete configuration hand-out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigAssignment {
    pub clock: u64,
    pub mapping: BTreeMap<ServerId, Configuration>,
}

/// Patrol state a server carries while it is leader. Dropped on step-down;
/// a re-elected leader starts from scratch.
#[derive(Clone, Debug)]
pub struct Patrol {
    pub leader: ServerId,
    /// The leader's own priority, reserved out of the follower pool.
    pub leader_priority: u32,
    pub tracker: BTreeMap<ServerId, FollowerRecord>,
    pub assignment: ConfigAssignment,
}

impl Patrol {
    /// Fresh patrol for a newly elected leader. Until replies teach it
    /// otherwise, the leader assumes followers still hold their initial
    /// id-equals-priority configurations, and its assignment clock picks up
    /// from the leader's own, so the first round it issues is strictly newer
    /// than anything the leader has seen.
    pub fn new(leader: ServerId, leader_config: Configuration, params: &ProtocolParams) -> Self {
        let mut tracker = BTreeMap::new();
        let mut mapping = BTreeMap::new();
        for id in 1..=params.n {
            if id == leader {
                continue;
            }
            tracker.insert(id, FollowerRecord::default());
            mapping.insert(
                id,
                Configuration {
                    priority: id,
                    timer_period: params
                        .election_timeout(id)
                        .expect("server ids are valid priorities"),
                    conf_clock: leader_config.conf_clock,
                },
            );
        }
        Patrol {
            leader,
            leader_priority: leader_config.priority,
            tracker,
            assignment: ConfigAssignment {
                clock: leader_config.conf_clock,
                mapping,
            },
        }
    }

    /// Fold one heartbeat reply into the tracker. Replies answering a round
    /// older than the freshest already recorded are dropped; the reported
    /// log index never decreases (a follower that truncated a conflicting
    /// suffix still ranks by the most it ever proved to hold). Returns false
    /// for servers outside the follower set, which are ignored.
    pub fn record_reply(
        &mut self,
        from: ServerId,
        status: FollowerStatus,
        answered_clock: u64,
    ) -> bool {
        let Some(rec) = self.tracker.get_mut(&from) else {
            return false;
        };
        if rec.responded && answered_clock < rec.reply_clock {
            return true;
        }
        rec.responded = true;
        rec.reply_clock = answered_clock;
        rec.log_index = rec.log_index.max(status.log_index);
        true
    }

    /// Issue the next round: followers ordered by reported log index, then
    /// reply recency, then previous priority, then id — and the priority
    /// pool dealt out in descending order down that list. Timer periods
    /// follow each priority, so the most responsive follower also gets the
    /// shortest election timer.
    pub fn rearrange(&mut self, params: &ProtocolParams) -> &ConfigAssignment {
        // Responsiveness key: None for followers that never answered, so
        // they collate below every responder and rank among themselves only
        // by previous priority and id.
        let key = |id: &ServerId| {
            let r = &self.tracker[id];
            r.responded.then_some((r.log_index, r.reply_clock))
        };
        let mut order: Vec<ServerId> = self.tracker.keys().copied().collect();
        order.sort_by(|a, b| {
            let (pa, pb) = (
                self.assignment.mapping[a].priority,
                self.assignment.mapping[b].priority,
            );
            key(b).cmp(&key(a)).then(pb.cmp(&pa)).then(a.cmp(b))
        });
        let pool = (1..=params.n).rev().filter(|&p| p != self.leader_priority);

        let clock = self.assignment.clock + 1;
        let mapping = order
            .into_iter()
            .zip(pool)
            .map(|(id, priority)| {
                let timer_period = params
                    .election_timeout(priority)
                    .expect("pool priorities are valid");
                (
                    id,
                    Configuration {
                        priority,
                        timer_period,
                        conf_clock: clock,
                    },
                )
            })
            .collect();
        self.assignment = ConfigAssignment { clock, mapping };
        &self.assignment
    }

    /// The configuration to piggyback on the next append to `target`.
    pub fn config_for(&self, target: ServerId) -> Result<Configuration, PatrolError> {
        self.assignment
            .mapping
            .get(&target)
            .copied()
            .ok_or(PatrolError::NoAssignment(target))
    }
}
