//! On-disk scenario format: a TOML document mirroring [`Scenario`] with
//! millisecond durations and a closed schema — unknown keys are parse
//! errors, so typos fail loudly instead of silently running defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use escape_core::harness::{force_competing_phases, CrashTarget, Scenario};
use escape_core::protocol::{ms, Variant};
use serde::Deserialize;

/// A scenario document. `variant` and `n` are required; everything else
/// falls back to the library defaults. Durations are milliseconds. Fault
/// times are offsets from the end of the stabilization phase; a crash entry
/// with server `0` targets whichever server is leading when the schedule
/// was laid out.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub variant: Variant,
    pub n: u32,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
    pub base_time_ms: Option<u64>,
    pub k_ms: Option<u64>,
    pub raft_timeout_range_ms: Option<[u64; 2]>,
    pub heartbeat_ms: Option<u64>,
    pub latency_ms: Option<[u64; 2]>,
    pub loss_rate: Option<f64>,
    /// Pairs of (server, time_ms); server 0 means the current leader.
    pub crash_schedule: Option<Vec<(u32, u64)>>,
    /// Pairs of (server, time_ms).
    pub recover_schedule: Option<Vec<(u32, u64)>>,
    pub forced_phases: Option<u32>,
    pub horizon_ms: Option<u64>,
    /// Log entries the leader generates per heartbeat round.
    pub entries_per_heartbeat: Option<u32>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<ScenarioFile> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario file {}", path.display()))?;
        let file: ScenarioFile = toml::from_str(&text)
            .with_context(|| format!("cannot parse scenario file {}", path.display()))?;
        file.check_durations()?;
        Ok(file)
    }

    /// Reject zero durations up front; a zero heartbeat or horizon would
    /// otherwise surface as a confusing simulation error much later.
    fn check_durations(&self) -> Result<()> {
        let positive: [(&str, Option<u64>); 4] = [
            ("base_time_ms", self.base_time_ms),
            ("k_ms", self.k_ms),
            ("heartbeat_ms", self.heartbeat_ms),
            ("horizon_ms", self.horizon_ms),
        ];
        for (key, value) in positive {
            if value == Some(0) {
                bail!("{key} must be a positive duration");
            }
        }
        for (key, pair) in [
            ("raft_timeout_range_ms", self.raft_timeout_range_ms),
            ("latency_ms", self.latency_ms),
        ] {
            if let Some([lo, hi]) = pair {
                if lo == 0 || hi == 0 {
                    bail!("{key} entries must be positive durations");
                }
            }
        }
        Ok(())
    }

    /// Build the runnable scenario, named after the file stem.
    pub fn into_scenario(self, name: &str) -> Result<Scenario> {
        let mut sc = Scenario::new(name, self.variant, self.n);
        if let Some(v) = self.trials {
            sc.trials = v;
        }
        if let Some(v) = self.seed {
            sc.base_seed = v;
        }
        if let Some(v) = self.base_time_ms {
            sc.base_time = ms(v);
        }
        if let Some(v) = self.k_ms {
            sc.k = ms(v);
        }
        if let Some([lo, hi]) = self.raft_timeout_range_ms {
            sc.raft_timeout_range = (ms(lo), ms(hi));
        }
        if let Some(v) = self.heartbeat_ms {
            sc.heartbeat_interval = ms(v);
        }
        if let Some([lo, hi]) = self.latency_ms {
            sc.latency = (ms(lo), ms(hi));
        }
        if let Some(v) = self.loss_rate {
            sc.loss_rate = v;
        }
        if let Some(v) = self.entries_per_heartbeat {
            sc.entries_per_heartbeat = v;
        }
        if let Some(v) = self.horizon_ms {
            sc.horizon = ms(v);
        }
        for (server, at) in self.crash_schedule.unwrap_or_default() {
            let target = if server == 0 {
                CrashTarget::Leader
            } else {
                CrashTarget::Server(server)
            };
            sc.faults.crashes.push((ms(at), target));
        }
        for (server, at) in self.recover_schedule.unwrap_or_default() {
            sc.faults.recoveries.push((ms(at), server));
        }
        if let Some(phases) = self.forced_phases {
            sc = force_competing_phases(&sc, phases)?;
        }
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioFile> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.check_durations()?;
        Ok(file)
    }

    #[test]
    fn minimal_file_uses_library_defaults() {
        let sc = parse("variant = \"escape\"\nn = 5\n")
            .unwrap()
            .into_scenario("t")
            .unwrap();
        assert_eq!(sc.variant, Variant::Escape);
        assert_eq!(sc.base_time, ms(1500));
        assert_eq!(sc.trials, 1);
        sc.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = parse("variant = \"raft\"\nn = 5\nheart_beat_ms = 100\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("heart_beat_ms"), "{err}");
    }

    #[test]
    fn zero_durations_are_rejected() {
        let err = parse("variant = \"raft\"\nn = 5\nheartbeat_ms = 0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("heartbeat_ms"), "{err}");
    }

    #[test]
    fn crash_server_zero_targets_the_leader() {
        let sc = parse("variant = \"raft\"\nn = 5\ncrash_schedule = [[0, 999]]\n")
            .unwrap()
            .into_scenario("t")
            .unwrap();
        assert_eq!(sc.faults.crashes, vec![(ms(999), CrashTarget::Leader)]);
    }

    #[test]
    fn forced_phases_pin_candidates() {
        let text = "variant = \"escape\"\nn = 8\ncrash_schedule = [[0, 999]]\nforced_phases = 2\n";
        let sc = parse(text).unwrap().into_scenario("t").unwrap();
        assert_eq!(sc.forced_phases, 2);
        assert_eq!(sc.pins_after_last_crash.len(), 3);
        assert!(sc.silence_bystanders);
    }
}
