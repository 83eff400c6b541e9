//! Trace invariant checker: replays a finished trial's event record and
//! verifies the safety and liveness properties every run must satisfy.
//!
//! All checks are pure functions of the trace plus the scenario facts
//! (variant, sizes, network bounds). A violation names the broken invariant
//! and the trial seed so the exact run can be replayed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::protocol::{LogIndex, Micros, Role, ServerId, Term, Variant};
use crate::simnet::{Event, MsgKind};

/// One broken invariant, tied to the seed that reproduces it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub seed: u64,
    pub at: Micros,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invariant '{}' violated at {}us (seed {}): {}",
            self.invariant, self.at, self.seed, self.detail
        )
    }
}

/// A finished trial plus the scenario facts the checks depend on.
pub struct TraceCheck<'a> {
    pub events: &'a [Event],
    pub variant: Variant,
    pub degenerate: bool,
    pub n: u32,
    pub base_time: Micros,
    pub k: Micros,
    pub latency: (Micros, Micros),
    pub loss_rate: f64,
    /// Scenario forced extra competing campaigns.
    pub forced: bool,
    pub had_recoveries: bool,
    /// Metrics anchor: the last scheduled crash.
    pub anchor: Micros,
    /// Time of the last injected fault of any kind (crash or recovery).
    pub last_fault: Micros,
    pub converged: bool,
    pub seed: u64,
}

impl TraceCheck<'_> {
    fn priority_variant(&self) -> bool {
        matches!(self.variant, Variant::ZRaft | Variant::Escape) && !self.degenerate
    }

    fn escape_live(&self) -> bool {
        self.variant == Variant::Escape && !self.degenerate
    }
}

struct Tracker {
    term: BTreeMap<ServerId, Term>,
    /// Term each server held before its latest term change.
    prev_term: BTreeMap<ServerId, Term>,
    /// Per-server log as terms at 1-based indices.
    logs: BTreeMap<ServerId, Vec<Term>>,
    commit: BTreeMap<ServerId, LogIndex>,
    /// Term agreed for each committed index, fixed by the first commit.
    committed: BTreeMap<LogIndex, Term>,
    cfg_priority: BTreeMap<ServerId, u32>,
    cfg_clock: BTreeMap<ServerId, u64>,
    crashed: BTreeSet<ServerId>,
    leaders: BTreeMap<Term, ServerId>,
    votes: BTreeMap<(ServerId, Term), ServerId>,
    /// (candidate, term) -> (vote requests sent, vote replies received).
    campaign_msgs: BTreeMap<(ServerId, Term), (u32, u32)>,
}

/// Replay one trace and report every invariant violation found.
pub fn check_trace(c: &TraceCheck) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut t = Tracker {
        term: BTreeMap::new(),
        prev_term: BTreeMap::new(),
        logs: BTreeMap::new(),
        commit: BTreeMap::new(),
        committed: BTreeMap::new(),
        cfg_priority: (1..=c.n)
            .map(|id| (id, if c.priority_variant() { id } else { 1 }))
            .collect(),
        cfg_clock: (1..=c.n).map(|id| (id, 0)).collect(),
        crashed: BTreeSet::new(),
        leaders: BTreeMap::new(),
        votes: BTreeMap::new(),
        campaign_msgs: BTreeMap::new(),
    };
    let fail = |out: &mut Vec<Violation>, invariant, at, detail: String| {
        out.push(Violation {
            invariant,
            seed: c.seed,
            at,
            detail,
        });
    };

    for ev in c.events {
        match *ev {
            Event::TermChanged { at, server, term } => {
                let old = t.term.get(&server).copied().unwrap_or(0);
                if term <= old {
                    fail(
                        &mut out,
                        "term-monotonic",
                        at,
                        format!("server {server} moved from term {old} to {term}"),
                    );
                }
                t.prev_term.insert(server, old);
                t.term.insert(server, term);
            }
            Event::RoleChanged {
                at,
                server,
                role: Role::Leader,
                term,
            } => {
                if let Some(&other) = t.leaders.get(&term) {
                    if other != server {
                        fail(
                            &mut out,
                            "election-safety",
                            at,
                            format!("servers {other} and {server} both led term {term}"),
                        );
                    }
                }
                t.leaders.insert(term, server);
            }
            Event::RoleChanged { .. } => {}
            Event::CampaignStarted {
                at,
                server,
                term,
                priority,
            } => {
                let prev = t.prev_term.get(&server).copied().unwrap_or(0);
                let jump = term.saturating_sub(prev);
                let expected = if c.priority_variant() {
                    priority as Term
                } else {
                    1
                };
                if jump != expected {
                    fail(
                        &mut out,
                        "campaign-term-jump",
                        at,
                        format!(
                            "server {server} jumped {prev} -> {term} (expected step {expected})"
                        ),
                    );
                }
                if c.priority_variant() {
                    let held = t.cfg_priority.get(&server).copied().unwrap_or(0);
                    if priority != held {
                        fail(
                            &mut out,
                            "campaign-priority",
                            at,
                            format!(
                                "server {server} campaigned as priority {priority} while holding {held}"
                            ),
                        );
                    }
                }
            }
            Event::VoteGranted {
                at,
                server,
                candidate,
                term,
            } => {
                if let Some(&earlier) = t.votes.get(&(server, term)) {
                    if earlier != candidate {
                        fail(
                            &mut out,
                            "single-vote-per-term",
                            at,
                            format!(
                                "server {server} voted for {earlier} and {candidate} in term {term}"
                            ),
                        );
                    }
                }
                t.votes.insert((server, term), candidate);
            }
            Event::VoteDenied { .. } => {}
            Event::ConfigAdopted {
                at,
                server,
                priority,
                timer_period,
                conf_clock,
            } => {
                if priority == 0 || priority > c.n {
                    fail(
                        &mut out,
                        "timer-period-formula",
                        at,
                        format!("server {server} adopted out-of-range priority {priority}"),
                    );
                } else {
                    let expected = c.base_time + c.k * (c.n - priority) as Micros;
                    if timer_period != expected {
                        fail(
                            &mut out,
                            "timer-period-formula",
                            at,
                            format!(
                                "priority {priority} came with period {timer_period}, expected {expected}"
                            ),
                        );
                    }
                }
                let old_clock = t.cfg_clock.get(&server).copied().unwrap_or(0);
                if conf_clock <= old_clock {
                    fail(
                        &mut out,
                        "config-clock-monotonic",
                        at,
                        format!(
                            "server {server} adopted clock {conf_clock} while holding {old_clock}"
                        ),
                    );
                }
                t.cfg_priority.insert(server, priority);
                t.cfg_clock.insert(server, conf_clock);
                if c.escape_live() {
                    check_max_clock_uniqueness(c, &t, at, &mut out);
                }
            }
            Event::LogTruncated {
                at,
                server,
                from_index,
            } => {
                let log = t.logs.entry(server).or_default();
                if from_index == 0 || from_index as usize > log.len() {
                    fail(
                        &mut out,
                        "log-contiguity",
                        at,
                        format!(
                            "server {server} truncated from {from_index} with {} entries",
                            log.len()
                        ),
                    );
                }
                log.truncate(from_index.saturating_sub(1) as usize);
            }
            Event::EntryAppended {
                at,
                server,
                index,
                term,
            } => {
                let log = t.logs.entry(server).or_default();
                if index as usize != log.len() + 1 {
                    fail(
                        &mut out,
                        "log-contiguity",
                        at,
                        format!(
                            "server {server} appended index {index} onto {} entries",
                            log.len()
                        ),
                    );
                }
                log.push(term);
            }
            Event::CommitAdvanced {
                at,
                server,
                commit_index,
            } => {
                let old = t.commit.get(&server).copied().unwrap_or(0);
                if commit_index < old {
                    fail(
                        &mut out,
                        "commit-monotonic",
                        at,
                        format!("server {server} commit moved {old} -> {commit_index}"),
                    );
                }
                let log = t.logs.entry(server).or_default();
                for idx in old + 1..=commit_index {
                    match log.get(idx as usize - 1) {
                        None => {
                            fail(
                                &mut out,
                                "committed-prefix-agreement",
                                at,
                                format!(
                                    "server {server} committed index {idx} beyond its log"
                                ),
                            );
                        }
                        Some(&term) => match t.committed.get(&idx) {
                            Some(&agreed) if agreed != term => {
                                fail(
                                    &mut out,
                                    "committed-prefix-agreement",
                                    at,
                                    format!(
                                        "index {idx}: server {server} committed term {term}, agreed term {agreed}"
                                    ),
                                );
                            }
                            Some(_) => {}
                            None => {
                                t.committed.insert(idx, term);
                            }
                        },
                    }
                }
                t.commit.insert(server, commit_index);
            }
            Event::MsgSent {
                at, from, to, summary,
            } => match summary.msg {
                MsgKind::RequestVote => {
                    let e = t.campaign_msgs.entry((from, summary.term)).or_default();
                    e.0 += 1;
                    if e.0 > c.n - 1 {
                        fail(
                            &mut out,
                            "campaign-message-bound",
                            at,
                            format!(
                                "candidate {from} sent {} vote requests in term {}",
                                e.0, summary.term
                            ),
                        );
                    }
                }
                MsgKind::RequestVoteReply => {
                    if let Some(term) = summary.answers_term {
                        let e = t.campaign_msgs.entry((to, term)).or_default();
                        e.1 += 1;
                        if e.1 > c.n - 1 {
                            fail(
                                &mut out,
                                "campaign-message-bound",
                                at,
                                format!(
                                    "candidate {to} received {} vote replies in term {term}",
                                    e.1
                                ),
                            );
                        }
                    }
                }
                _ => {}
            },
            Event::MsgDelivered { at, sent_at, .. } => {
                let (lo, hi) = c.latency;
                let flight = at - sent_at;
                if flight < lo || flight > hi {
                    fail(
                        &mut out,
                        "latency-bounds",
                        at,
                        format!("delivery took {flight}us, bounds [{lo}, {hi}]"),
                    );
                }
            }
            Event::MsgDropped { .. } => {}
            Event::Crashed { at: _, server } => {
                t.crashed.insert(server);
            }
            Event::Recovered { at, server } => {
                // Volatile state is gone: commits re-advance from zero and
                // re-validate against the agreed prefix. The configuration
                // survives the crash, so a rejoining server can surface a
                // duplicate that was dormant while it was down.
                t.commit.insert(server, 0);
                t.crashed.remove(&server);
                if c.escape_live() {
                    check_max_clock_uniqueness(c, &t, at, &mut out);
                }
            }
        }
    }

    check_recovery_behavior(c, &mut out);
    out
}

/// Among the servers currently up, those holding the maximum configuration
/// clock must carry pairwise-distinct priorities. Evaluated whenever a
/// configuration is delivered or a crashed holder rejoins.
fn check_max_clock_uniqueness(
    c: &TraceCheck,
    t: &Tracker,
    at: Micros,
    out: &mut Vec<Violation>,
) {
    let live = || (1..=c.n).filter(|id| !t.crashed.contains(id));
    let Some(max_clock) = live().map(|id| t.cfg_clock[&id]).max() else {
        return;
    };
    let mut seen: BTreeMap<u32, ServerId> = BTreeMap::new();
    for id in live().filter(|id| t.cfg_clock[id] == max_clock) {
        let p = t.cfg_priority[&id];
        if let Some(&other) = seen.get(&p) {
            out.push(Violation {
                invariant: "config-uniqueness",
                seed: c.seed,
                at,
                detail: format!(
                    "servers {other} and {id} both hold priority {p} at max clock {max_clock}"
                ),
            });
        }
        seen.insert(p, id);
    }
}

/// Post-fault liveness: after the last injected fault, the surviving
/// majority must crown a leader within `f + 1` campaigns (priority ladder
/// fallback), and — in a loss-free unforced run — within exactly the first
/// campaign started, with no rival in its term.
fn check_recovery_behavior(c: &TraceCheck, out: &mut Vec<Violation>) {
    if !c.escape_live() || c.loss_rate > 0.0 || !c.converged {
        return;
    }

    let f = (c.n - 1) / 2;
    let post_fault: Vec<&Event> = c
        .events
        .iter()
        .filter(|e| e.at() >= c.last_fault)
        .collect();

    let campaigns = post_fault
        .iter()
        .filter(|e| matches!(e, Event::CampaignStarted { .. }))
        .count() as u32;
    if campaigns > f + 1 {
        out.push(Violation {
            invariant: "leader-emerges-within-f-plus-1",
            seed: c.seed,
            at: c.last_fault,
            detail: format!("{campaigns} campaigns after the last fault, bound {}", f + 1),
        });
    }

    if c.forced || c.had_recoveries {
        return;
    }

    // Single-campaign convergence: the first post-fault campaign wins, alone
    // in its term. Lower-term stragglers may fire before the winner's first
    // heartbeat lands, but they can neither win nor force a revote.
    let mut first: Option<(ServerId, Term)> = None;
    let mut rivals = 0u32;
    let mut final_leader: Option<(ServerId, Term)> = None;
    for ev in &post_fault {
        match **ev {
            Event::CampaignStarted { server, term, .. } => match first {
                None => first = Some((server, term)),
                Some((cand, t0)) if term == t0 && server != cand => rivals += 1,
                _ => {}
            },
            Event::RoleChanged {
                server,
                role: Role::Leader,
                term,
                ..
            } => final_leader = Some((server, term)),
            _ => {}
        }
    }
    let Some((cand, term)) = first else { return };
    if rivals > 0 {
        out.push(Violation {
            invariant: "single-campaign-convergence",
            seed: c.seed,
            at: c.last_fault,
            detail: format!("{rivals} rival campaigns joined term {term}"),
        });
    }
    if final_leader != Some((cand, term)) {
        out.push(Violation {
            invariant: "single-campaign-convergence",
            seed: c.seed,
            at: c.last_fault,
            detail: format!(
                "first campaign was {cand} in term {term}, but leadership settled on {final_leader:?}"
            ),
        });
    }
}
