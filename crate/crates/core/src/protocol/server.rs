//! Per-server protocol state machine.
//!
//! Handlers mutate the server state and return [`Effects`] describing what
//! the simulator must do next (messages to send, a timer to arm). They are
//! deterministic functions of the state, the input and the seeded RNG that
//! backs Raft's timeout sampling, which is what makes whole trials
//! replayable.

use std::collections::BTreeSet;

use rand::Rng;

use super::types::*;

/// Volatile replication state a server keeps only while it is leader.
#[derive(Clone, Debug)]
pub struct LeaderVolatile {
    /// Next log index to send to each server (self slot unused).
    pub next_index: Vec<LogIndex>,
    /// Highest log index known replicated on each server (self slot unused).
    pub match_index: Vec<LogIndex>,
}

impl LeaderVolatile {
    fn new(n: u32, last_index: LogIndex) -> Self {
        LeaderVolatile {
            next_index: vec![last_index + 1; n as usize + 1],
            match_index: vec![0; n as usize + 1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    StaleTerm,
    AlreadyVoted,
    StaleLog,
    StaleClock,
}

/// What a handler asks the simulator to do.
#[derive(Default, Debug)]
pub struct Effects {
    /// Same message fanned out to every peer; travels the lossy path.
    pub broadcast: Option<Message>,
    /// Point-to-point reply to the sender of the message just handled.
    pub reply: Option<Message>,
    /// New election deadline to arm, replacing any previously armed timer.
    pub arm_timer: Option<Micros>,
    /// The server just won its election.
    pub became_leader: bool,
    /// Vote verdict for trace purposes, when the input was a vote request.
    pub vote_denied: Option<DenyReason>,
    /// Assignment clock carried by the append this reply answers, echoed so
    /// the leader can attribute the reply to a patrol round.
    pub answered_clock: Option<u64>,
    /// `(index, term)` of each entry appended by this handler.
    pub appended: Vec<(LogIndex, Term)>,
    /// First index removed, when a conflicting suffix was truncated.
    pub truncated_from: Option<LogIndex>,
}

#[derive(Clone, Debug)]
pub struct ServerState {
    pub id: ServerId,
    pub role: Role,
    pub current_term: Term,
    /// The single vote cast in a term, keyed by term so a vote in an old
    /// term never blocks one in a newer term.
    pub voted_for: Option<(Term, ServerId)>,
    pub log: Vec<LogEntry>,
    pub commit_index: LogIndex,
    pub config: Configuration,
    /// Absolute deadline of the armed election timer; `None` while leading.
    pub election_deadline: Option<Micros>,
    pub votes_received: BTreeSet<ServerId>,
    pub leader_volatile: Option<LeaderVolatile>,
    pub crashed: bool,
}

impl ServerState {
    /// A fresh server under the initial configuration assignment: priority
    /// equals the server id, so ids double as the starting priority order.
    /// Raft ignores priorities; its servers carry an inert priority-1
    /// configuration so campaign records stay uniform across variants.
    pub fn new(id: ServerId, params: &ProtocolParams) -> Result<Self, ProtocolError> {
        let config = match params.variant {
            Variant::Raft => Configuration {
                priority: 1,
                timer_period: params.base_time,
                conf_clock: 0,
            },
            Variant::ZRaft | Variant::Escape => Configuration {
                priority: id,
                timer_period: params.election_timeout(id)?,
                conf_clock: 0,
            },
        };
        Ok(ServerState {
            id,
            role: Role::Follower,
            current_term: 0,
            voted_for: None,
            log: Vec::new(),
            commit_index: 0,
            config,
            election_deadline: None,
            votes_received: BTreeSet::new(),
            leader_volatile: None,
            crashed: false,
        })
    }

    pub fn last_log_index(&self) -> LogIndex {
        self.log.last().map_or(0, |e| e.index)
    }

    pub fn last_log_term(&self) -> Term {
        self.log.last().map_or(0, |e| e.term)
    }

    /// Term of the entry at `index`, `Some(0)` for the empty prefix at
    /// index 0, `None` past the end of the log.
    pub fn entry_term(&self, index: LogIndex) -> Option<Term> {
        if index == 0 {
            return Some(0);
        }
        self.log.get(index as usize - 1).map(|e| e.term)
    }

    /// Fresh timer period from "now": Raft resamples, the priority variants
    /// use the period of the currently held configuration.
    pub fn timer_period(&self, params: &ProtocolParams, rng: &mut impl Rng) -> Micros {
        match params.variant {
            Variant::Raft => params.sample_raft_timeout(rng),
            Variant::ZRaft | Variant::Escape => self.config.timer_period,
        }
    }

    fn become_follower(&mut self) {
        self.role = Role::Follower;
        self.votes_received.clear();
        self.leader_volatile = None;
    }

    /// Adopt the larger of the local and received terms. A term advance
    /// demotes to follower; the vote slot is free again because votes are
    /// keyed by term. Returns whether the term advanced while leading, in
    /// which case the caller must re-arm the election timer.
    pub fn merge_term(&mut self, received: Term) -> bool {
        if received <= self.current_term {
            return false;
        }
        let was_leader = self.role == Role::Leader;
        self.current_term = received;
        if self.role != Role::Follower {
            self.become_follower();
        }
        was_leader
    }

    /// Term jump on campaign start: one for Raft, the currently held
    /// priority for Z-Raft and Escape.
    pub fn campaign_term_jump(&self, variant: Variant) -> u64 {
        match variant {
            Variant::Raft => 1,
            Variant::ZRaft | Variant::Escape => self.config.priority as u64,
        }
    }

    /// Election timer fired: become candidate, jump the term, vote for
    /// ourselves and ask everyone else. In a single-server cluster the own
    /// vote is already a quorum.
    pub fn start_election(
        &mut self,
        now: Micros,
        params: &ProtocolParams,
        rng: &mut impl Rng,
    ) -> Result<Effects, ProtocolError> {
        if self.role == Role::Leader {
            return Err(ProtocolError::LeaderCampaign);
        }
        self.role = Role::Candidate;
        self.current_term += self.campaign_term_jump(params.variant);
        self.voted_for = Some((self.current_term, self.id));
        self.votes_received.clear();
        self.votes_received.insert(self.id);

        let mut fx = Effects::default();
        if self.votes_received.len() >= params.quorum() {
            self.become_leader(params);
            fx.became_leader = true;
            self.election_deadline = None;
            return Ok(fx);
        }
        let deadline = now + self.timer_period(params, rng);
        self.election_deadline = Some(deadline);
        fx.arm_timer = Some(deadline);
        fx.broadcast = Some(Message::RequestVote(RequestVoteArgs {
            term: self.current_term,
            candidate: self.id,
            last_log_index: self.last_log_index(),
            last_log_term: self.last_log_term(),
            conf_clock: match params.variant {
                Variant::Escape => self.config.conf_clock,
                Variant::Raft | Variant::ZRaft => 0,
            },
        }));
        Ok(fx)
    }

    /// The candidate's log must be at least as up to date as ours:
    /// compare (last term, last index) lexicographically.
    pub fn log_up_to_date(&self, last_log_index: LogIndex, last_log_term: Term) -> bool {
        (last_log_term, last_log_index) >= (self.last_log_term(), self.last_log_index())
    }

    /// Decide a vote request. Grants require a current term, a free vote
    /// slot, an up-to-date candidate log and — for Escape unless clock
    /// checks are disabled — a candidate configuration clock at least as
    /// fresh as the voter's. Granting resets the election timer.
    pub fn handle_request_vote(
        &mut self,
        args: &RequestVoteArgs,
        now: Micros,
        params: &ProtocolParams,
        rng: &mut impl Rng,
        enforce_conf_clock: bool,
    ) -> Effects {
        let mut fx = Effects::default();
        if self.merge_term(args.term) {
            // A deposed leader has no timer armed; give it one so it can
            // rejoin the election race. Other merges leave timers alone:
            // only granting a vote restarts the countdown.
            let deadline = now + self.timer_period(params, rng);
            self.election_deadline = Some(deadline);
            fx.arm_timer = Some(deadline);
        }

        let vote_taken =
            matches!(self.voted_for, Some((t, c)) if t == self.current_term && c != args.candidate);
        let deny = if args.term < self.current_term {
            Some(DenyReason::StaleTerm)
        } else if vote_taken {
            Some(DenyReason::AlreadyVoted)
        } else if !self.log_up_to_date(args.last_log_index, args.last_log_term) {
            Some(DenyReason::StaleLog)
        } else if enforce_conf_clock && args.conf_clock < self.config.conf_clock {
            Some(DenyReason::StaleClock)
        } else {
            None
        };

        let granted = deny.is_none();
        if granted {
            self.voted_for = Some((self.current_term, args.candidate));
            let deadline = now + self.timer_period(params, rng);
            self.election_deadline = Some(deadline);
            fx.arm_timer = Some(deadline);
        }
        fx.vote_denied = deny;
        fx.reply = Some(Message::RequestVoteReply(RequestVoteReply {
            term: self.current_term,
            vote_granted: granted,
        }));
        fx
    }

    /// Count a vote reply. Stale (old-term) and duplicate grants are
    /// harmless; a quorum promotes to leader.
    pub fn handle_vote_reply(
        &mut self,
        from: ServerId,
        reply: &RequestVoteReply,
        now: Micros,
        params: &ProtocolParams,
        rng: &mut impl Rng,
    ) -> Effects {
        let mut fx = Effects::default();
        if self.merge_term(reply.term) {
            let deadline = now + self.timer_period(params, rng);
            self.election_deadline = Some(deadline);
            fx.arm_timer = Some(deadline);
        }
        if self.role != Role::Candidate || reply.term != self.current_term || !reply.vote_granted {
            return fx;
        }
        self.votes_received.insert(from);
        if self.votes_received.len() >= params.quorum() {
            self.become_leader(params);
            fx.became_leader = true;
        }
        fx
    }

    fn become_leader(&mut self, params: &ProtocolParams) {
        self.role = Role::Leader;
        self.votes_received.clear();
        self.election_deadline = None;
        self.leader_volatile = Some(LeaderVolatile::new(params.n, self.last_log_index()));
    }

    /// Follower side of append/heartbeat. The reply always carries the
    /// follower's last log index and current timer period so the leader's
    /// patrol can rank responsiveness even across failed consistency checks.
    pub fn handle_append_entries(
        &mut self,
        args: &AppendEntriesArgs,
        now: Micros,
        params: &ProtocolParams,
        rng: &mut impl Rng,
    ) -> Effects {
        let mut fx = Effects::default();
        self.merge_term(args.term);
        if args.term < self.current_term {
            fx.reply = Some(Message::AppendEntriesReply(AppendEntriesReply {
                term: self.current_term,
                success: false,
                status: self.follower_status(),
            }));
            return fx;
        }
        // A heartbeat from the legitimate current-term leader: an equal-term
        // candidate stands down, and the election timer restarts.
        if self.role == Role::Candidate {
            self.become_follower();
        }
        debug_assert!(
            self.role != Role::Leader,
            "two leaders in term {}",
            self.current_term
        );
        let mut deadline = now + self.timer_period(params, rng);

        let consistent = match self.entry_term(args.prev_log_index) {
            Some(t) => t == args.prev_log_term,
            None => false,
        };
        if consistent {
            for entry in &args.entries {
                match self.entry_term(entry.index) {
                    Some(t) if t == entry.term => continue, // already have it
                    Some(_) => {
                        // Conflict: drop this entry and everything after it.
                        fx.truncated_from.get_or_insert(entry.index);
                        self.log.truncate(entry.index as usize - 1);
                        self.log.push(entry.clone());
                        fx.appended.push((entry.index, entry.term));
                    }
                    None => {
                        debug_assert_eq!(entry.index, self.last_log_index() + 1);
                        self.log.push(entry.clone());
                        fx.appended.push((entry.index, entry.term));
                    }
                }
            }
            if args.leader_commit > self.commit_index {
                self.commit_index = args.leader_commit.min(self.last_log_index());
            }
        }

        // Configuration adoption rides on any current-term append, even one
        // that failed the log consistency check: a recovering server must be
        // able to refresh a stale configuration before its log caught up.
        if let Some(new_config) = args.new_config {
            if new_config.conf_clock > self.config.conf_clock {
                self.config = new_config;
                deadline = now + new_config.timer_period;
            }
            fx.answered_clock = Some(new_config.conf_clock);
        }

        self.election_deadline = Some(deadline);
        fx.arm_timer = Some(deadline);
        fx.reply = Some(Message::AppendEntriesReply(AppendEntriesReply {
            term: self.current_term,
            success: consistent,
            status: self.follower_status(),
        }));
        fx
    }

    fn follower_status(&self) -> FollowerStatus {
        FollowerStatus {
            log_index: self.last_log_index(),
            timer_period: self.config.timer_period,
        }
    }

    /// Leader side of an append reply: track replication progress, retreat
    /// next-index on failed consistency checks, advance the commit index
    /// once a current-term entry is on a quorum.
    pub fn handle_append_reply(
        &mut self,
        from: ServerId,
        reply: &AppendEntriesReply,
        now: Micros,
        params: &ProtocolParams,
        rng: &mut impl Rng,
    ) -> Effects {
        let mut fx = Effects::default();
        if self.merge_term(reply.term) {
            let deadline = now + self.timer_period(params, rng);
            self.election_deadline = Some(deadline);
            fx.arm_timer = Some(deadline);
            return fx;
        }
        if self.role != Role::Leader || reply.term != self.current_term {
            return fx;
        }
        let lv = self.leader_volatile.as_mut().expect("leader state");
        let slot = from as usize;
        if reply.success {
            lv.match_index[slot] = lv.match_index[slot].max(reply.status.log_index);
            lv.next_index[slot] = lv.match_index[slot] + 1;
        } else {
            // The follower's log ends at status.log_index; retry from just
            // past it, or one step back if we were already below that.
            let retreat = lv.next_index[slot].saturating_sub(1).max(1);
            lv.next_index[slot] = retreat.min(reply.status.log_index + 1);
        }
        self.advance_commit(params);
        fx
    }

    fn advance_commit(&mut self, params: &ProtocolParams) {
        let lv = self.leader_volatile.as_ref().expect("leader state");
        let mut candidate = self.last_log_index();
        while candidate > self.commit_index {
            let replicated = 1 + (1..=params.n)
                .filter(|&s| s != self.id && lv.match_index[s as usize] >= candidate)
                .count();
            if replicated >= params.quorum() && self.entry_term(candidate) == Some(self.current_term)
            {
                self.commit_index = candidate;
                break;
            }
            candidate -= 1;
        }
    }

    /// Crash: volatile state is lost on the spot; term, vote, log and
    /// configuration survive.
    pub fn crash(&mut self) {
        self.crashed = true;
        self.votes_received.clear();
        self.leader_volatile = None;
        self.election_deadline = None;
        if self.role != Role::Follower {
            self.role = Role::Follower;
        }
    }

    /// Recovery: rejoin as follower with a clean volatile slate and the
    /// (possibly stale) retained configuration driving the timer.
    pub fn recover(&mut self, now: Micros, params: &ProtocolParams, rng: &mut impl Rng) -> Micros {
        self.crashed = false;
        self.become_follower();
        self.commit_index = 0;
        let deadline = now + self.timer_period(params, rng);
        self.election_deadline = Some(deadline);
        deadline
    }
}
