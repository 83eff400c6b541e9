//! Scenario descriptions: everything a reproducible experiment needs — the
//! protocol variant and its parameters, the network model, the fault
//! schedule, and the trial/seed plan.

use thiserror::Error;

use crate::protocol::{ms, Micros, ProtocolParams, ServerId, Variant};

/// Which server a scheduled crash hits. `Leader` resolves to whoever won the
/// stabilization-phase election, so suites can crash "the" leader without
/// naming it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrashTarget {
    Leader,
    Server(ServerId),
}

/// Fault injections, with all offsets relative to the end of the
/// stabilization phase (first leader elected plus one full heartbeat round).
#[derive(Clone, Debug, Default)]
pub struct FaultSchedule {
    pub crashes: Vec<(Micros, CrashTarget)>,
    pub recoveries: Vec<(Micros, ServerId)>,
    /// Fixed first election deadlines (absolute simulated time). Servers not
    /// listed sample their first timeout normally.
    pub pinned_timeouts: Vec<(ServerId, Micros)>,
}

/// A complete, runnable experiment description. One scenario fans out into
/// `trials` independent runs seeded `base_seed ^ trial_index`.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub variant: Variant,
    pub n: u32,
    pub base_time: Micros,
    pub k: Micros,
    pub raft_timeout_range: (Micros, Micros),
    pub heartbeat_interval: Micros,
    pub latency: (Micros, Micros),
    pub loss_rate: f64,
    pub faults: FaultSchedule,
    pub trials: u32,
    pub base_seed: u64,
    /// Number of forced simultaneous-campaign phases (0 = leave the scenario
    /// untouched). Set through [`force_competing_phases`].
    pub forced_phases: u32,
    /// Post-fault time budget: a trial that has not settled a leader within
    /// this window of the last crash counts as non-converged.
    pub horizon: Micros,
    /// Entries the leader appends per heartbeat round, so logs differentiate
    /// under loss.
    pub entries_per_heartbeat: u32,
    /// Run the priority machinery stripped to plain Raft behavior.
    pub degenerate: bool,
    /// Election deadlines written when the last scheduled crash fires,
    /// as offsets from that crash. For a server crashed at that moment the
    /// pin applies at its recovery instead.
    pub pins_after_last_crash: Vec<(ServerId, Micros)>,
    /// Park every non-pinned follower's timer until the post-crash election
    /// resolves, making them pure voters (forced-competition construction).
    pub silence_bystanders: bool,
    /// Permit loss rates at or above one half (normally rejected because a
    /// majority of every broadcast must survive for elections to finish).
    pub allow_high_loss: bool,
}

impl Scenario {
    /// A plain scenario with sensible defaults: no faults, no loss, one
    /// trial. Suites build from this.
    pub fn new(name: impl Into<String>, variant: Variant, n: u32) -> Self {
        Scenario {
            name: name.into(),
            variant,
            n,
            base_time: ms(1500),
            k: ms(500),
            raft_timeout_range: (ms(1500), ms(3000)),
            heartbeat_interval: ms(1000),
            latency: (ms(100), ms(200)),
            loss_rate: 0.0,
            faults: FaultSchedule::default(),
            trials: 1,
            base_seed: 0,
            forced_phases: 0,
            horizon: ms(15_000),
            entries_per_heartbeat: 0,
            degenerate: false,
            pins_after_last_crash: Vec::new(),
            silence_bystanders: false,
            allow_high_loss: false,
        }
    }

    pub fn params(&self) -> ProtocolParams {
        ProtocolParams {
            variant: self.variant,
            n: self.n,
            base_time: self.base_time,
            k: self.k,
            raft_timeout_range: self.raft_timeout_range,
            heartbeat_interval: self.heartbeat_interval,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.params()
            .validate()
            .map_err(|e| ScenarioError::Params(e.to_string()))?;
        if self.trials == 0 {
            return Err(ScenarioError::Invalid("trials must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(ScenarioError::Invalid("horizon must be positive".into()));
        }
        let (lo, hi) = self.latency;
        if lo == 0 || lo > hi {
            return Err(ScenarioError::Invalid(format!(
                "bad latency range [{lo}, {hi}]"
            )));
        }
        if !(0.0..=1.0).contains(&self.loss_rate) {
            return Err(ScenarioError::Invalid(format!(
                "loss rate {} outside [0, 1]",
                self.loss_rate
            )));
        }
        if self.loss_rate >= 0.5 && !self.allow_high_loss {
            return Err(ScenarioError::Invalid(format!(
                "loss rate {} drops a majority of every broadcast; \
                 set allow_high_loss to run it anyway",
                self.loss_rate
            )));
        }
        for &(id, _) in &self.faults.pinned_timeouts {
            if id == 0 || id > self.n {
                return Err(ScenarioError::Invalid(format!(
                    "pinned timeout for unknown server {id}"
                )));
            }
        }
        for &(rec_at, id) in &self.faults.recoveries {
            if id == 0 || id > self.n {
                return Err(ScenarioError::Invalid(format!(
                    "recovery for unknown server {id}"
                )));
            }
            // Leader crashes resolve to a concrete server only at run time,
            // so any earlier one may cover this recovery.
            let crashed_before = self.faults.crashes.iter().any(|&(at, target)| {
                at < rec_at
                    && match target {
                        CrashTarget::Leader => true,
                        CrashTarget::Server(s) => s == id,
                    }
            });
            if !crashed_before {
                return Err(ScenarioError::Invalid(format!(
                    "server {id} recovers without a prior crash"
                )));
            }
        }
        for &(id, _) in &self.pins_after_last_crash {
            if id == 0 || id > self.n {
                return Err(ScenarioError::Invalid(format!(
                    "pin for unknown server {id}"
                )));
            }
        }
        if !self.pins_after_last_crash.is_empty() && self.faults.crashes.is_empty() {
            return Err(ScenarioError::Invalid(
                "post-crash pins need at least one scheduled crash".into(),
            ));
        }
        if self.pins_after_last_crash.len() > (self.n - 1) as usize {
            return Err(ScenarioError::Invalid(format!(
                "{} pinned candidates exceed the {} followers",
                self.pins_after_last_crash.len(),
                self.n - 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("invalid protocol parameters: {0}")]
    Params(String),
    #[error("cannot force {requested} competing phases with {n} servers: needs {candidates} synchronized candidates but only {} other followers exist", n - 2)]
    TooManyPhases { requested: u32, candidates: u32, n: u32 },
}

/// Offset from the triggering crash at which pinned candidates fire. Both
/// protocols then show the same detection delay, isolating the election
/// phases themselves.
pub const FORCED_DETECTION: Micros = ms(1200);

/// Derive a forced-competition scenario: `phases` complete simultaneous
/// campaign rounds before the election may resolve.
///
/// With `phases = 0` the scenario is returned unchanged. Otherwise the
/// highest-priority followers get their election deadlines pinned to one
/// instant after the crash, every other follower is parked as a pure voter,
/// and for Raft the pinned candidates' re-election timeouts stay aligned so
/// each forced round splits again. Raft pins at least three candidates: two
/// synchronized candidates resolve their first round too often for the round
/// to count as reliably split, while the priority variants settle round one
/// by term precedence no matter how many candidates fire.
pub fn force_competing_phases(base: &Scenario, phases: u32) -> Result<Scenario, ScenarioError> {
    if phases == 0 {
        return Ok(base.clone());
    }
    let candidates = match base.variant {
        Variant::Raft => (phases + 1).max(3),
        Variant::ZRaft | Variant::Escape => phases + 1,
    };
    if candidates > base.n - 1 {
        return Err(ScenarioError::TooManyPhases {
            requested: phases,
            candidates,
            n: base.n,
        });
    }
    let mut sc = base.clone();
    sc.name = format!("{}+{}phase", base.name, phases);
    sc.forced_phases = phases;
    // The stabilized leader is server n and the steady-state assignment is
    // the identity, so the top followers are n-1 downwards.
    sc.pins_after_last_crash = (0..candidates)
        .map(|i| (base.n - 1 - i, FORCED_DETECTION))
        .collect();
    sc.silence_bystanders = true;
    Ok(sc)
}
