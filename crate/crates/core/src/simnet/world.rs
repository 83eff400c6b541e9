//! Deterministic discrete-event simulation of a cluster on a lossy network.
//!
//! A single binary heap orders events by `(time, seq)`, where `seq` is the
//! insertion counter, so simultaneous events process in insertion order and a
//! run is a pure function of its configuration and seed. Three independent
//! ChaCha streams drive randomness — election timeouts, message latency, and
//! loss selection — so changing, say, the loss rate never perturbs the
//! latency draws of the surviving messages.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ppf::Patrol;
use crate::protocol::{
    AppendEntriesArgs, Configuration, LogEntry, Message, Micros, ProtocolError, ProtocolParams,
    ServerId, ServerState, Term, Variant,
};

use super::trace::{DropCause, Event, MsgSummary, Trace};

/// Far-future deadline used to park timers that must not fire: bystanders
/// during forced competition. Roughly eleven simulated days.
const PARKED: Micros = 1_000_000_000_000;

/// Delay between a scheduled pin batch's crash instant and the moment the
/// pinned deadlines are written, so heartbeats already in flight at the crash
/// cannot re-arm a pinned timer afterwards. Longer than the maximum latency
/// of any suite, far shorter than any pinned deadline.
pub const PIN_APPLY_DELAY: Micros = 250_000;

/// Network delay model: per-message latency uniform over an inclusive range,
/// plus a broadcast loss rate.
#[derive(Clone, Copy, Debug)]
pub struct NetModel {
    pub latency: (Micros, Micros),
    /// Fraction of each broadcast's recipients that never receive it.
    /// Replies are point-to-point and never lost.
    pub loss_rate: f64,
}

/// Full construction-time configuration of a world.
#[derive(Clone, Debug)]
pub struct WorldConfig {
    pub params: ProtocolParams,
    pub net: NetModel,
    pub seed: u64,
    /// Entries the leader appends to its own log at each heartbeat round,
    /// so follower logs differentiate under loss.
    pub entries_per_heartbeat: u32,
    /// Strip the priority machinery down to plain Raft behavior: inert
    /// priority-1 configurations, no piggybacked assignments, no clock checks.
    pub degenerate: bool,
    /// Fixed first election deadlines; servers absent here sample normally.
    pub initial_deadlines: BTreeMap<ServerId, Micros>,
}

/// Why `run_until` returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The caller's predicate became true.
    Predicate,
    /// Simulated time passed the horizon with the predicate still false.
    Horizon,
    /// The event queue drained (only possible in degenerate setups).
    Idle,
}

#[derive(Clone, Debug)]
enum SimEvent {
    Deliver {
        to: ServerId,
        from: ServerId,
        msg: Message,
        sent_at: Micros,
        answers_term: Option<Term>,
        answers_clock: Option<u64>,
    },
    TimerFire {
        server: ServerId,
        deadline: Micros,
    },
    HeartbeatTick {
        leader: ServerId,
        term: Term,
    },
    Crash {
        server: ServerId,
    },
    Recover {
        server: ServerId,
    },
    /// Write a batch of pinned election deadlines (absolute times). Pins for
    /// currently crashed servers apply when they recover instead.
    ApplyPins {
        pins: Vec<(ServerId, Micros)>,
    },
}

struct QueuedEvent {
    time: Micros,
    seq: u64,
    ev: SimEvent,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Forced-competition machinery: a set of pinned candidates whose campaigns
/// are synchronized, everyone else parked as pure voters until the election
/// resolves. For Raft the re-election timeouts of the pinned candidates stay
/// aligned until `phases` simultaneous rounds have fired.
#[derive(Clone, Debug)]
struct ForcedState {
    pinned: BTreeSet<ServerId>,
    phases: u32,
    /// Align pinned re-election deadlines round by round (Raft; priority
    /// variants resolve the first round on term precedence anyway).
    align: bool,
    /// True from pin application until the next leader election.
    active: bool,
    rounds_done: u32,
    last_round_at: Option<Micros>,
    /// Shared re-arm deadline of the current round, keyed by round index.
    round_anchor: Option<(u32, Micros)>,
}

/// The simulated cluster plus network, clock, and trace.
pub struct World {
    pub params: ProtocolParams,
    pub servers: Vec<ServerState>,
    pub now: Micros,
    pub trace: Trace,
    net: NetModel,
    entries_per_heartbeat: u32,
    degenerate: bool,
    initial_deadlines: BTreeMap<ServerId, Micros>,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    seq: u64,
    timeout_rng: ChaCha8Rng,
    latency_rng: ChaCha8Rng,
    loss_rng: ChaCha8Rng,
    patrol: Option<Patrol>,
    /// Set between a leader's election and its first scheduled round: the
    /// immediate post-election round carries no assignment because the fresh
    /// patrol has not ranked anyone yet.
    patrol_fresh: bool,
    /// Most recent election: `(leader, term, elected_at)`.
    last_elected: Option<(ServerId, Term, Micros)>,
    /// Whether the most recently elected leader has seen at least one
    /// successful append reply in its term.
    leader_acked: bool,
    forced: Option<ForcedState>,
    deferred_pins: BTreeMap<ServerId, Micros>,
}

impl World {
    pub fn new(cfg: WorldConfig) -> Result<Self, ProtocolError> {
        cfg.params.validate()?;
        let mut servers = Vec::with_capacity(cfg.params.n as usize);
        for id in 1..=cfg.params.n {
            let mut s = ServerState::new(id, &cfg.params)?;
            if cfg.degenerate {
                s.config = Configuration {
                    priority: 1,
                    timer_period: cfg.params.base_time,
                    conf_clock: 0,
                };
            }
            servers.push(s);
        }
        let base = ChaCha8Rng::seed_from_u64(cfg.seed);
        let stream = |i: u64| {
            let mut r = base.clone();
            r.set_stream(i);
            r
        };
        Ok(World {
            servers,
            now: 0,
            trace: Trace::default(),
            net: cfg.net,
            entries_per_heartbeat: cfg.entries_per_heartbeat,
            degenerate: cfg.degenerate,
            initial_deadlines: cfg.initial_deadlines,
            queue: BinaryHeap::new(),
            seq: 0,
            timeout_rng: stream(0),
            latency_rng: stream(1),
            loss_rng: stream(2),
            patrol: None,
            patrol_fresh: false,
            last_elected: None,
            leader_acked: false,
            forced: None,
            deferred_pins: BTreeMap::new(),
            params: cfg.params,
        })
    }

    /// Arm every server's first election timer: the pinned deadline where
    /// one was configured, a fresh sample otherwise.
    pub fn start(&mut self) {
        for id in 1..=self.params.n {
            let deadline = match self.initial_deadlines.get(&id) {
                Some(&d) => d,
                None => {
                    let idx = (id - 1) as usize;
                    self.now + self.servers[idx].timer_period(&self.params, &mut self.timeout_rng)
                }
            };
            self.servers[(id - 1) as usize].election_deadline = Some(deadline);
            self.schedule(deadline, SimEvent::TimerFire {
                server: id,
                deadline,
            });
        }
    }

    pub fn schedule_crash(&mut self, at: Micros, server: ServerId) {
        self.schedule(at, SimEvent::Crash { server });
    }

    pub fn schedule_recovery(&mut self, at: Micros, server: ServerId) {
        self.schedule(at, SimEvent::Recover { server });
    }

    /// Queue a batch of pinned election deadlines, written at `apply_at`.
    pub fn schedule_pins(&mut self, apply_at: Micros, pins: Vec<(ServerId, Micros)>) {
        self.schedule(apply_at, SimEvent::ApplyPins { pins });
    }

    /// Configure forced competition. Becomes active when the pin batch is
    /// applied; deactivates on the next election.
    pub fn set_forced(&mut self, pinned: BTreeSet<ServerId>, phases: u32, align: bool) {
        self.forced = Some(ForcedState {
            pinned,
            phases,
            align,
            active: false,
            rounds_done: 0,
            last_round_at: None,
            round_anchor: None,
        });
    }

    pub fn last_elected(&self) -> Option<(ServerId, Term, Micros)> {
        self.last_elected
    }

    /// A live leader whose election the cluster has acknowledged: elected at
    /// or after `anchor`, still leading in its election term, and in receipt
    /// of at least one successful append reply since winning.
    pub fn settled_leader_since(&self, anchor: Micros) -> Option<ServerId> {
        let (id, term, at) = self.last_elected?;
        if at < anchor || !self.leader_acked {
            return None;
        }
        let s = &self.servers[(id - 1) as usize];
        if s.crashed || s.role != crate::protocol::Role::Leader || s.current_term != term {
            return None;
        }
        Some(id)
    }

    /// Run until the predicate holds, the horizon passes, or the queue
    /// drains. Events scheduled exactly at the horizon still run.
    pub fn run_until(
        &mut self,
        horizon: Micros,
        pred: impl Fn(&World) -> bool,
    ) -> StopReason {
        loop {
            if pred(self) {
                return StopReason::Predicate;
            }
            match self.queue.peek() {
                None => return StopReason::Idle,
                Some(Reverse(qe)) if qe.time > horizon => {
                    self.now = horizon;
                    return StopReason::Horizon;
                }
                Some(_) => {}
            }
            let Reverse(qe) = self.queue.pop().expect("peeked event");
            debug_assert!(qe.time >= self.now, "time went backwards");
            self.now = qe.time;
            self.process(qe.ev);
        }
    }

    fn schedule(&mut self, at: Micros, ev: SimEvent) {
        debug_assert!(at >= self.now, "scheduling into the past");
        let qe = QueuedEvent {
            time: at,
            seq: self.seq,
            ev,
        };
        self.seq += 1;
        self.queue.push(Reverse(qe));
    }

    fn escape_live(&self) -> bool {
        self.params.variant == Variant::Escape && !self.degenerate
    }

    fn idx(id: ServerId) -> usize {
        (id - 1) as usize
    }

    /// Sample one latency draw.
    fn latency(&mut self) -> Micros {
        let (lo, hi) = self.net.latency;
        self.latency_rng.gen_range(lo..=hi)
    }

    /// Send one broadcast round of per-recipient messages. Exactly
    /// `round(loss_rate * recipients)` of them, chosen uniformly without
    /// replacement, are lost on the wire; the rest are delivered with
    /// independent latencies. Crashed recipients drop theirs at delivery.
    fn broadcast(&mut self, from: ServerId, batch: Vec<(ServerId, Message)>) {
        if batch.is_empty() {
            return;
        }
        let drop_count = (self.net.loss_rate * batch.len() as f64).round() as usize;
        let dropped: BTreeSet<usize> = if drop_count == 0 {
            BTreeSet::new()
        } else {
            rand::seq::index::sample(&mut self.loss_rng, batch.len(), drop_count)
                .into_iter()
                .collect()
        };
        for (i, (to, msg)) in batch.into_iter().enumerate() {
            let summary = MsgSummary::of(&msg);
            self.trace.push(Event::MsgSent {
                at: self.now,
                from,
                to,
                summary,
            });
            // One latency draw per send slot, dropped or not, so the loss
            // rate never shifts which draw a surviving slot receives.
            let lat = self.latency();
            if dropped.contains(&i) {
                self.trace.push(Event::MsgDropped {
                    at: self.now,
                    from,
                    to,
                    cause: DropCause::Loss,
                    summary,
                });
                continue;
            }
            let sent_at = self.now;
            self.schedule(sent_at + lat, SimEvent::Deliver {
                to,
                from,
                msg,
                sent_at,
                answers_term: None,
                answers_clock: None,
            });
        }
    }

    /// Send a point-to-point reply. Replies are never lost on the wire.
    fn reply(
        &mut self,
        from: ServerId,
        to: ServerId,
        msg: Message,
        answers_term: Option<Term>,
        answers_clock: Option<u64>,
    ) {
        let mut summary = MsgSummary::of(&msg);
        summary.answers_term = answers_term;
        summary.answers_clock = answers_clock;
        self.trace.push(Event::MsgSent {
            at: self.now,
            from,
            to,
            summary,
        });
        let lat = self.latency();
        let sent_at = self.now;
        self.schedule(sent_at + lat, SimEvent::Deliver {
            to,
            from,
            msg,
            sent_at,
            answers_term,
            answers_clock,
        });
    }

    /// Emit term/role change records for a server against a snapshot.
    fn push_state_diff(&mut self, id: ServerId, before: (Term, crate::protocol::Role)) {
        let s = &self.servers[Self::idx(id)];
        if s.current_term != before.0 {
            self.trace.push(Event::TermChanged {
                at: self.now,
                server: id,
                term: s.current_term,
            });
        }
        if s.role != before.1 {
            self.trace.push(Event::RoleChanged {
                at: self.now,
                server: id,
                role: s.role,
                term: s.current_term,
            });
        }
    }

    /// Apply a handler's timer request, parking it instead if the server is a
    /// silenced bystander of an active forced competition.
    fn apply_arm(&mut self, id: ServerId, arm: Option<Micros>) {
        let Some(deadline) = arm else { return };
        if self.is_silenced(id) {
            self.servers[Self::idx(id)].election_deadline = Some(self.now + PARKED);
            return;
        }
        self.schedule(deadline, SimEvent::TimerFire {
            server: id,
            deadline,
        });
    }

    fn is_silenced(&self, id: ServerId) -> bool {
        self.forced
            .as_ref()
            .is_some_and(|f| f.active && !f.pinned.contains(&id))
    }

    /// One leader heartbeat round: append this round's entries to the
    /// leader's own log, re-rank the assignment (except on the immediate
    /// post-election round, when no replies have been seen yet), and send a
    /// per-follower append carrying that follower's backlog and, for the
    /// priority patrol, its current configuration.
    fn heartbeat_round(&mut self, id: ServerId) {
        let n = self.params.n;
        let idx = Self::idx(id);
        for _ in 0..self.entries_per_heartbeat {
            let s = &mut self.servers[idx];
            let index = s.last_log_index() + 1;
            let term = s.current_term;
            s.log.push(LogEntry {
                index,
                term,
                payload: Vec::new(),
            });
            self.trace.push(Event::EntryAppended {
                at: self.now,
                server: id,
                index,
                term,
            });
        }

        let piggyback = if self.escape_live() {
            if self.patrol_fresh {
                self.patrol_fresh = false;
                false
            } else {
                let patrol = self.patrol.as_mut().expect("leader has a patrol");
                patrol.rearrange(&self.params);
                true
            }
        } else {
            false
        };

        let mut batch = Vec::with_capacity(n as usize - 1);
        for to in 1..=n {
            if to == id {
                continue;
            }
            let s = &self.servers[idx];
            let lv = s.leader_volatile.as_ref().expect("leader volatile state");
            let next = lv.next_index[to as usize];
            let prev_log_index = next - 1;
            let prev_log_term = s
                .entry_term(prev_log_index)
                .expect("next_index within leader log");
            let entries = s.log[(next - 1) as usize..].to_vec();
            let new_config = if piggyback {
                Some(
                    self.patrol
                        .as_ref()
                        .expect("leader has a patrol")
                        .config_for(to)
                        .expect("assignment covers every follower"),
                )
            } else {
                None
            };
            batch.push((
                to,
                Message::AppendEntries(AppendEntriesArgs {
                    term: self.servers[idx].current_term,
                    leader: id,
                    prev_log_index,
                    prev_log_term,
                    entries,
                    leader_commit: self.servers[idx].commit_index,
                    new_config,
                }),
            ));
        }
        self.broadcast(id, batch);
    }

    fn on_become_leader(&mut self, id: ServerId) {
        let idx = Self::idx(id);
        let term = self.servers[idx].current_term;
        self.last_elected = Some((id, term, self.now));
        // A single-server cluster has nobody to acknowledge it.
        self.leader_acked = self.params.n == 1;
        if self.escape_live() {
            self.patrol = Some(Patrol::new(id, self.servers[idx].config, &self.params));
            self.patrol_fresh = true;
        }
        if let Some(f) = &mut self.forced {
            f.active = false;
        }
        self.heartbeat_round(id);
        self.schedule(
            self.now + self.params.heartbeat_interval,
            SimEvent::HeartbeatTick { leader: id, term },
        );
    }

    fn process(&mut self, ev: SimEvent) {
        match ev {
            SimEvent::Deliver {
                to,
                from,
                msg,
                sent_at,
                answers_term,
                answers_clock,
            } => self.deliver(to, from, msg, sent_at, answers_term, answers_clock),
            SimEvent::TimerFire { server, deadline } => self.timer_fire(server, deadline),
            SimEvent::HeartbeatTick { leader, term } => {
                let s = &self.servers[Self::idx(leader)];
                if s.crashed
                    || s.role != crate::protocol::Role::Leader
                    || s.current_term != term
                {
                    return; // leadership ended; this chain dies
                }
                self.heartbeat_round(leader);
                self.schedule(
                    self.now + self.params.heartbeat_interval,
                    SimEvent::HeartbeatTick { leader, term },
                );
            }
            SimEvent::Crash { server } => {
                self.servers[Self::idx(server)].crash();
                self.trace.push(Event::Crashed {
                    at: self.now,
                    server,
                });
            }
            SimEvent::Recover { server } => {
                let deadline = {
                    let idx = Self::idx(server);
                    // Split borrow: the server samples from the timeout stream.
                    let (s, rng) = (&mut self.servers[idx], &mut self.timeout_rng);
                    s.recover(self.now, &self.params, rng)
                };
                self.trace.push(Event::Recovered {
                    at: self.now,
                    server,
                });
                let deadline = match self.deferred_pins.remove(&server) {
                    Some(pin) => {
                        self.servers[Self::idx(server)].election_deadline = Some(pin);
                        pin
                    }
                    None => deadline,
                };
                self.schedule(deadline, SimEvent::TimerFire {
                    server,
                    deadline,
                });
            }
            SimEvent::ApplyPins { pins } => {
                if let Some(f) = &mut self.forced {
                    f.active = true;
                }
                for (server, deadline) in pins {
                    if self.servers[Self::idx(server)].crashed {
                        self.deferred_pins.insert(server, deadline);
                        continue;
                    }
                    self.servers[Self::idx(server)].election_deadline = Some(deadline);
                    self.schedule(deadline, SimEvent::TimerFire {
                        server,
                        deadline,
                    });
                }
            }
        }
    }

    fn timer_fire(&mut self, id: ServerId, deadline: Micros) {
        let idx = Self::idx(id);
        {
            let s = &self.servers[idx];
            // Stale fires: the deadline moved (heartbeat, vote grant, pin,
            // crash) after this event was queued.
            if s.crashed || s.election_deadline != Some(deadline) {
                return;
            }
        }
        if self.is_silenced(id) {
            self.servers[idx].election_deadline = Some(self.now + PARKED);
            return;
        }
        let before = (self.servers[idx].current_term, self.servers[idx].role);
        let fx = {
            let (s, rng) = (&mut self.servers[idx], &mut self.timeout_rng);
            s.start_election(self.now, &self.params, rng)
                .expect("timers never fire on leaders")
        };
        self.push_state_diff(id, before);
        self.trace.push(Event::CampaignStarted {
            at: self.now,
            server: id,
            term: self.servers[idx].current_term,
            priority: self.servers[idx].config.priority,
        });

        // Forced competition: count this round and, when aligning, overwrite
        // the candidate's own re-election deadline with the round's shared
        // anchor so the pinned candidates stay synchronized.
        let mut rearm = fx.arm_timer;
        if let Some(f) = &mut self.forced {
            if f.pinned.contains(&id) {
                if f.last_round_at != Some(self.now) {
                    f.rounds_done += 1;
                    f.last_round_at = Some(self.now);
                }
                if f.align && f.rounds_done < f.phases {
                    let round = f.rounds_done;
                    let anchor = match f.round_anchor {
                        Some((r, d)) if r == round => d,
                        _ => {
                            let d = self.now
                                + self.servers[idx].timer_period(&self.params, &mut self.timeout_rng);
                            f.round_anchor = Some((round, d));
                            d
                        }
                    };
                    self.servers[idx].election_deadline = Some(anchor);
                    rearm = Some(anchor);
                }
            }
        }
        if fx.became_leader {
            // Single-server cluster: the campaign wins instantly.
            self.on_become_leader(id);
            return;
        }
        if let Some(dl) = rearm {
            self.schedule(dl, SimEvent::TimerFire {
                server: id,
                deadline: dl,
            });
        }
        if let Some(Message::RequestVote(args)) = fx.broadcast {
            let batch: Vec<(ServerId, Message)> = (1..=self.params.n)
                .filter(|&to| to != id)
                .map(|to| (to, Message::RequestVote(args)))
                .collect();
            self.broadcast(id, batch);
        }
    }

    fn deliver(
        &mut self,
        to: ServerId,
        from: ServerId,
        msg: Message,
        sent_at: Micros,
        answers_term: Option<Term>,
        answers_clock: Option<u64>,
    ) {
        let idx = Self::idx(to);
        let mut summary = MsgSummary::of(&msg);
        summary.answers_term = answers_term;
        summary.answers_clock = answers_clock;
        if self.servers[idx].crashed {
            self.trace.push(Event::MsgDropped {
                at: self.now,
                from,
                to,
                cause: DropCause::Crashed,
                summary,
            });
            return;
        }
        self.trace.push(Event::MsgDelivered {
            at: self.now,
            from,
            to,
            sent_at,
            summary,
        });

        let before = (self.servers[idx].current_term, self.servers[idx].role);
        match msg {
            Message::RequestVote(args) => {
                let enforce = self.escape_live();
                let fx = {
                    let (s, rng) = (&mut self.servers[idx], &mut self.timeout_rng);
                    s.handle_request_vote(&args, self.now, &self.params, rng, enforce)
                };
                self.push_state_diff(to, before);
                match fx.vote_denied {
                    None => self.trace.push(Event::VoteGranted {
                        at: self.now,
                        server: to,
                        candidate: args.candidate,
                        term: args.term,
                    }),
                    Some(reason) => self.trace.push(Event::VoteDenied {
                        at: self.now,
                        server: to,
                        candidate: args.candidate,
                        term: args.term,
                        reason,
                    }),
                }
                self.apply_arm(to, fx.arm_timer);
                if let Some(reply) = fx.reply {
                    self.reply(to, from, reply, Some(args.term), None);
                }
            }
            Message::RequestVoteReply(r) => {
                let fx = {
                    let (s, rng) = (&mut self.servers[idx], &mut self.timeout_rng);
                    s.handle_vote_reply(from, &r, self.now, &self.params, rng)
                };
                self.push_state_diff(to, before);
                self.apply_arm(to, fx.arm_timer);
                if fx.became_leader {
                    self.on_become_leader(to);
                }
            }
            Message::AppendEntries(args) => {
                let before_config = self.servers[idx].config;
                let before_commit = self.servers[idx].commit_index;
                let fx = {
                    let (s, rng) = (&mut self.servers[idx], &mut self.timeout_rng);
                    s.handle_append_entries(&args, self.now, &self.params, rng)
                };
                self.push_state_diff(to, before);
                let s = &self.servers[idx];
                if s.config != before_config {
                    self.trace.push(Event::ConfigAdopted {
                        at: self.now,
                        server: to,
                        priority: s.config.priority,
                        timer_period: s.config.timer_period,
                        conf_clock: s.config.conf_clock,
                    });
                }
                if let Some(from_index) = fx.truncated_from {
                    self.trace.push(Event::LogTruncated {
                        at: self.now,
                        server: to,
                        from_index,
                    });
                }
                for (index, term) in &fx.appended {
                    self.trace.push(Event::EntryAppended {
                        at: self.now,
                        server: to,
                        index: *index,
                        term: *term,
                    });
                }
                if self.servers[idx].commit_index != before_commit {
                    self.trace.push(Event::CommitAdvanced {
                        at: self.now,
                        server: to,
                        commit_index: self.servers[idx].commit_index,
                    });
                }
                self.apply_arm(to, fx.arm_timer);
                if let Some(reply) = fx.reply {
                    // The reply reflects whatever configuration clock the
                    // follower holds once the append (and any piggybacked
                    // adoption) has been applied.
                    let clock = self.servers[idx].config.conf_clock;
                    self.reply(to, from, reply, None, Some(clock));
                }
            }
            Message::AppendEntriesReply(r) => {
                {
                    let s = &self.servers[idx];
                    if self.escape_live()
                        && s.role == crate::protocol::Role::Leader
                        && s.current_term == r.term
                    {
                        if let Some(patrol) = self.patrol.as_mut() {
                            patrol.record_reply(from, r.status, answers_clock.unwrap_or(0));
                        }
                    }
                }
                let before_commit = self.servers[idx].commit_index;
                let fx = {
                    let (s, rng) = (&mut self.servers[idx], &mut self.timeout_rng);
                    s.handle_append_reply(from, &r, self.now, &self.params, rng)
                };
                self.push_state_diff(to, before);
                if self.servers[idx].commit_index != before_commit {
                    self.trace.push(Event::CommitAdvanced {
                        at: self.now,
                        server: to,
                        commit_index: self.servers[idx].commit_index,
                    });
                }
                self.apply_arm(to, fx.arm_timer);
                if r.success {
                    if let Some((lid, lterm, _)) = self.last_elected {
                        if lid == to && self.servers[idx].current_term == lterm {
                            self.leader_acked = true;
                        }
                    }
                }
            }
        }
    }
}
