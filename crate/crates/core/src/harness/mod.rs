//! Experiment harness: runs scenarios as batches of independent seeded
//! trials, extracts per-trial metrics, checks every trace against the
//! protocol invariants, and aggregates the results.
//!
//! A trial has two phases. The stabilization phase runs the cluster from
//! cold start until a leader is elected and acknowledged, plus one full
//! heartbeat round so steady-state configurations are in place. The
//! measurement phase then injects the scenario's faults and runs until a
//! new leader settles or the horizon passes. All reported durations are
//! relative to the metrics anchor — the last scheduled crash, or time zero
//! for fault-free scenarios.

pub mod checker;
pub mod metrics;
pub mod scenario;
pub mod stats;
pub mod suites;

pub use checker::{check_trace, TraceCheck, Violation};
pub use metrics::{trial_metrics, TrialResult};
pub use scenario::{
    force_competing_phases, CrashTarget, FaultSchedule, Scenario, ScenarioError, FORCED_DETECTION,
};
pub use stats::{
    censored_mean_total_ms, summarize, unresolved_after, SummaryStats, CDF_STEP,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::protocol::{ms, Micros, Variant};
use crate::simnet::{NetModel, StopReason, Trace, World, WorldConfig, PIN_APPLY_DELAY};

/// Cold-start budget: a scenario whose cluster cannot elect a first leader
/// within this window is considered misconfigured rather than measured.
pub const STABILIZE_HORIZON: Micros = ms(60_000);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("protocol rejected the scenario: {0}")]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error("trial seed {seed}: no leader stabilized within {}ms", STABILIZE_HORIZON / 1000)]
    Stabilization { seed: u64 },
    #[error("trial seed {seed}: fault at {at}us precedes the stabilization ack at {now}us")]
    FaultTooEarly { seed: u64, at: Micros, now: Micros },
}

/// One finished trial: its metrics row, any invariant violations, and the
/// full trace for export or golden comparisons.
pub struct TrialOutcome {
    pub result: TrialResult,
    pub violations: Vec<Violation>,
    pub trace: Trace,
}

/// An experiment cell: every trial's row, all violations, and the summary.
pub struct ExperimentResult {
    pub scenario: String,
    pub results: Vec<TrialResult>,
    pub violations: Vec<Violation>,
    pub stats: SummaryStats,
}

/// Run one seeded trial of a scenario end to end.
pub fn run_trial(sc: &Scenario, trial: u32) -> Result<TrialOutcome, HarnessError> {
    sc.validate()?;
    let seed = sc.base_seed ^ trial as u64;
    let params = sc.params();

    let initial_deadlines: BTreeMap<_, _> = sc.faults.pinned_timeouts.iter().copied().collect();
    let mut w = World::new(WorldConfig {
        params,
        net: NetModel {
            latency: sc.latency,
            loss_rate: sc.loss_rate,
        },
        seed,
        entries_per_heartbeat: sc.entries_per_heartbeat,
        degenerate: sc.degenerate,
        initial_deadlines,
    })?;
    w.start();

    // Phase 1: elect and acknowledge a first leader, then let one heartbeat
    // round land so every follower holds its steady-state configuration.
    let stop = w.run_until(STABILIZE_HORIZON, |w| w.settled_leader_since(0).is_some());
    if stop != StopReason::Predicate {
        return Err(HarnessError::Stabilization { seed });
    }
    let (first_leader, _, elected_at) = w.last_elected().expect("settled leader");
    let t_stab = elected_at + sc.heartbeat_interval;

    // Phase 2: inject the schedule. `Leader` targets resolve to the
    // stabilized leader.
    let mut last_crash: Option<Micros> = None;
    let mut last_fault: Micros = 0;
    for &(off, target) in &sc.faults.crashes {
        let at = t_stab + off;
        if at <= w.now {
            return Err(HarnessError::FaultTooEarly { seed, at, now: w.now });
        }
        let victim = match target {
            CrashTarget::Leader => first_leader,
            CrashTarget::Server(id) => id,
        };
        w.schedule_crash(at, victim);
        last_crash = Some(last_crash.map_or(at, |c| c.max(at)));
        last_fault = last_fault.max(at);
    }
    for &(off, id) in &sc.faults.recoveries {
        let at = t_stab + off;
        if at <= w.now {
            return Err(HarnessError::FaultTooEarly { seed, at, now: w.now });
        }
        w.schedule_recovery(at, id);
        last_fault = last_fault.max(at);
    }

    let anchor = last_crash.unwrap_or(0);
    if !sc.pins_after_last_crash.is_empty() {
        let crash = last_crash.expect("validated: pins require a crash");
        if sc.silence_bystanders {
            w.set_forced(
                sc.pins_after_last_crash.iter().map(|p| p.0).collect(),
                sc.forced_phases,
                sc.variant == Variant::Raft && sc.forced_phases > 0,
            );
        }
        let pins = sc
            .pins_after_last_crash
            .iter()
            .map(|&(id, off)| (id, crash + off))
            .collect();
        w.schedule_pins(crash + PIN_APPLY_DELAY, pins);
    }

    let stop = w.run_until(anchor + sc.horizon, |w| {
        w.settled_leader_since(anchor).is_some()
    });
    let converged = stop == StopReason::Predicate;

    let result = trial_metrics(
        &w.trace.events,
        anchor,
        converged,
        trial,
        sc.variant,
        sc.n,
        seed,
    );
    let violations = check_trace(&TraceCheck {
        events: &w.trace.events,
        variant: sc.variant,
        degenerate: sc.degenerate,
        n: sc.n,
        base_time: sc.base_time,
        k: sc.k,
        latency: sc.latency,
        loss_rate: sc.loss_rate,
        forced: sc.forced_phases > 0,
        had_recoveries: !sc.faults.recoveries.is_empty(),
        anchor,
        last_fault,
        converged,
        seed,
    });

    Ok(TrialOutcome {
        result,
        violations,
        trace: w.trace,
    })
}

fn collect(sc: &Scenario, outcomes: Vec<TrialOutcome>) -> ExperimentResult {
    let mut results = Vec::with_capacity(outcomes.len());
    let mut violations = Vec::new();
    for o in outcomes {
        results.push(o.result);
        violations.extend(o.violations);
    }
    let stats = summarize(&results);
    ExperimentResult {
        scenario: sc.name.clone(),
        results,
        violations,
        stats,
    }
}

/// Run every trial of a scenario one after another on the calling thread.
pub fn run_experiment_sequential(sc: &Scenario) -> Result<ExperimentResult, HarnessError> {
    sc.validate()?;
    let outcomes = (0..sc.trials)
        .map(|t| run_trial(sc, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(collect(sc, outcomes))
}

/// Run a scenario's trials across the rayon pool. Trials are independent
/// and individually seeded, so the result is identical to the sequential
/// runner — rows come back in trial order regardless of completion order.
#[cfg(feature = "parallel")]
pub fn run_experiment(sc: &Scenario) -> Result<ExperimentResult, HarnessError> {
    use rayon::prelude::*;
    sc.validate()?;
    let outcomes = (0..sc.trials)
        .into_par_iter()
        .map(|t| run_trial(sc, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(collect(sc, outcomes))
}

/// Without the `parallel` feature the batch runner is the sequential one.
#[cfg(not(feature = "parallel"))]
pub fn run_experiment(sc: &Scenario) -> Result<ExperimentResult, HarnessError> {
    run_experiment_sequential(sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ms;

    fn leader_crash_scenario(variant: Variant, n: u32) -> Scenario {
        let mut sc = Scenario::new("crash-leader", variant, n);
        sc.heartbeat_interval = ms(1000);
        sc.faults
            .crashes
            .push((sc.heartbeat_interval - ms(1), CrashTarget::Leader));
        sc.trials = 4;
        sc.base_seed = 11_235;
        sc
    }

    #[test]
    fn an_escape_trial_recovers_from_a_leader_crash() {
        let sc = leader_crash_scenario(Variant::Escape, 5);
        let out = run_trial(&sc, 0).unwrap();
        assert!(out.violations.is_empty(), "{:?}", out.violations);
        let r = &out.result;
        assert!(r.converged);
        assert_eq!(r.winner, Some(4), "the top follower takes over");
        assert_eq!(r.split_vote_phases, 0);
        let total = r.total.unwrap();
        assert!(
            (ms(1301)..=ms(1601)).contains(&total),
            "total {total}us outside the staleness-window bounds"
        );
        let d = r.detection.unwrap();
        assert!((ms(1101)..=ms(1201)).contains(&d), "detection {d}us");
    }

    #[test]
    fn sequential_and_parallel_runs_agree_row_for_row() {
        let sc = leader_crash_scenario(Variant::Escape, 5);
        let a = run_experiment(&sc).unwrap();
        let b = run_experiment_sequential(&sc).unwrap();
        assert_eq!(a.results, b.results);
        assert!(a.violations.is_empty());
        assert_eq!(a.stats.converged, 4);
    }

    #[test]
    fn a_fault_free_scenario_measures_the_cold_start() {
        let mut sc = Scenario::new("cold-start", Variant::Escape, 5);
        sc.base_seed = 7;
        let out = run_trial(&sc, 0).unwrap();
        assert!(out.result.converged);
        assert_eq!(out.result.winner, Some(5), "initial priorities favor n");
        assert_eq!(out.result.campaigns, 1);
        // Fires at its 1500ms period, then two message legs to quorum.
        let total = out.result.total.unwrap();
        assert!((ms(1700)..=ms(1900)).contains(&total), "total {total}us");
        assert!(out.violations.is_empty(), "{:?}", out.violations);
    }

    #[test]
    fn raft_trials_converge_with_pinned_first_timeouts() {
        let mut sc = leader_crash_scenario(Variant::Raft, 5);
        sc.faults.pinned_timeouts = vec![
            (5, ms(1500)),
            (1, ms(2600)),
            (2, ms(2603)),
            (3, ms(2606)),
            (4, ms(2609)),
        ];
        let exp = run_experiment_sequential(&sc).unwrap();
        assert!(exp.violations.is_empty(), "{:?}", exp.violations);
        assert_eq!(exp.stats.converged, 4);
        for r in &exp.results {
            // Raft resamples on every reset: detection is a fresh draw from
            // [1500, 3000] minus up to a heartbeat of staleness.
            let d = r.detection.unwrap();
            assert!(
                (ms(601)..=ms(2201)).contains(&d),
                "detection {d}us outside the resample window"
            );
            assert!(r.winner.is_some());
        }
    }
}
