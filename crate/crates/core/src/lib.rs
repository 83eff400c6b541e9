//! Deterministic discrete-event simulation of leader election.
//!
//! Three protocol variants share one state machine:
//!
//! * **Raft** — randomized election timeouts, term advances by one per
//!   campaign.
//! * **Z-Raft** — static per-server priorities; the election timeout is
//!   derived from the priority and the term advances by the priority.
//! * **Escape** — Z-Raft's priority scheme plus a probing patrol run by the
//!   leader that rearranges priority configurations every heartbeat round
//!   according to follower responsiveness, and a configuration-clock rule
//!   that keeps stale servers from winning elections.
//!
//! The [`simnet`] module provides the event queue, latency and loss model;
//! [`harness`] runs seeded trials, extracts election metrics and checks
//! safety/liveness invariants on the recorded traces.
//!
//! Everything is deterministic: a trial is a pure function of its scenario
//! and seed, and re-running it reproduces the trace byte for byte.

pub mod harness;
pub mod ppf;
pub mod protocol;
pub mod simnet;
