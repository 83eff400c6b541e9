//! Acceptance gate: eight release criteria, one test per criterion. Each
//! test prints a single `criterion N: PASS/FAIL` line with the numbers it
//! measured (visible under `--nocapture`, or in the failure report), and the
//! thresholds are pinned constants so a regression flips a verdict instead
//! of quietly moving a goalpost. The population-statistics criteria run full
//! experiment matrices, so this target is the slowest in the workspace by
//! design.

use std::time::{Duration, Instant};

use escape_core::harness::{
    censored_mean_total_ms, run_experiment, run_experiment_sequential, run_trial, suites,
    unresolved_after, ExperimentResult,
};
use escape_core::protocol::{ms, Micros, Variant};

// Trial counts per experiment cell.
const E1_TRIALS: u32 = 1000;
const E2_TRIALS: u32 = 2000;
const E3_TRIALS: u32 = 300;
const E4_TRIALS: u32 = 200;

// Criterion 1: every Escape trial must finish under this bound, split-free,
// and the whole sweep must fit the runtime budget.
const ESCAPE_TOTAL_CEILING: Micros = ms(2000);
const E1_RUNTIME_BUDGET: Duration = Duration::from_secs(300);

// Criterion 2: Raft split-vote rate at n=128 must land in this band and
// grow strictly from n=32 upward.
const SPLIT_BAND_N128: (f64, f64) = (0.10, 0.30);

// Criterion 3: fraction of five-server Raft elections still unresolved at
// this cutoff, for the narrowest timeout range, must land in the band.
const UNRESOLVED_CUTOFF: Micros = ms(3500);
const UNRESOLVED_BAND_1800: (f64, f64) = (0.08, 0.30);

// Criterion 4: forced-competition expectations.
const RAFT_P3_OVER_P0_MIN: f64 = 3.0;
const REDUCTION_FLOORS_N128: [f64; 3] = [0.40, 0.55, 0.65];

// Criterion 5: loss-sweep expectations (floor already includes a 15-point
// allowance under the nominal 35%).
const ORDERING_MIN_LOSS: f64 = 0.2;
const REDUCTION_FLOOR_N100_D40: f64 = 0.20;

// Criteria 7 and 8: determinism probes.
const RERUN_TRIALS: u32 = 10;
const DEGENERACY_SEEDS: u64 = 25;

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Run one cell, folding its invariant violations into `violations`.
fn run_cell(
    sc: &escape_core::harness::Scenario,
    violations: &mut Vec<String>,
) -> ExperimentResult {
    let exp = run_experiment(sc).expect("cell runs");
    violations.extend(exp.violations.iter().map(|v| format!("{}: {v}", sc.name)));
    exp
}

/// Strictly decreasing prefix followed by a strictly increasing suffix, with
/// both arms non-empty.
fn is_u_shaped(means: &[f64]) -> bool {
    (1..means.len() - 1).any(|pivot| {
        means[..=pivot].windows(2).all(|w| w[1] < w[0])
            && means[pivot..].windows(2).all(|w| w[1] > w[0])
    })
}

#[test]
fn criterion_1_escape_elections_never_split_and_finish_under_two_seconds() {
    let started = Instant::now();
    let mut violations = Vec::new();
    let mut offenders = Vec::new();
    let mut trials = 0usize;
    for n in suites::SCALE_SIZES {
        let sc = suites::leader_crash(Variant::Escape, n, E1_TRIALS, suites::CRASH_SUITE_SEED);
        let exp = run_cell(&sc, &mut violations);
        trials += exp.results.len();
        for r in &exp.results {
            let ok = r.converged
                && r.split_vote_phases == 0
                && r.total.is_some_and(|t| t < ESCAPE_TOTAL_CEILING);
            if !ok {
                offenders.push(format!(
                    "n={n} seed {}: converged={} splits={} total={:?}",
                    r.seed, r.converged, r.split_vote_phases, r.total
                ));
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = violations.is_empty() && offenders.is_empty() && elapsed < E1_RUNTIME_BUDGET;
    println!(
        "criterion 1: {} — Escape leader-crash sweep, {trials} trials over n ∈ {:?}: \
         {} offenders (need 0 splits and total < {} ms everywhere), ran in {:.1?}",
        verdict(pass),
        suites::SCALE_SIZES,
        offenders.len(),
        ESCAPE_TOTAL_CEILING / 1000,
        elapsed
    );
    assert!(
        pass,
        "violations: {violations:?}; first offenders: {:?}; elapsed {elapsed:?}",
        &offenders[..offenders.len().min(5)]
    );
}

#[test]
fn criterion_2_raft_split_rate_sits_in_band_at_128_and_grows_with_scale() {
    let mut violations = Vec::new();
    let mut rates = Vec::new();
    for n in suites::SCALE_SIZES {
        let sc = suites::leader_crash(Variant::Raft, n, E1_TRIALS, suites::CRASH_SUITE_SEED);
        let exp = run_cell(&sc, &mut violations);
        rates.push((n, exp.stats.split_vote_rate));
    }
    let rate = |n: u32| rates.iter().find(|(m, _)| *m == n).unwrap().1;
    let in_band = (SPLIT_BAND_N128.0..=SPLIT_BAND_N128.1).contains(&rate(128));
    let growing = rate(32) < rate(64) && rate(64) < rate(128);
    let pass = violations.is_empty() && in_band && growing;
    println!(
        "criterion 2: {} — Raft split-vote rates {:?}%; n=128 in [{}, {}]%: {}, \
         strict growth from n=32: {}",
        verdict(pass),
        rates
            .iter()
            .map(|(n, r)| (*n, (r * 1000.0).round() / 10.0))
            .collect::<Vec<_>>(),
        SPLIT_BAND_N128.0 * 100.0,
        SPLIT_BAND_N128.1 * 100.0,
        in_band,
        growing
    );
    assert!(pass, "rates {rates:?}, violations {violations:?}");
}

#[test]
fn criterion_3_more_timeout_randomness_trades_stragglers_for_longer_elections() {
    let mut violations = Vec::new();
    let mut unresolved = Vec::new();
    let mut means = Vec::new();
    for upper in suites::RANDOMNESS_UPPER_BOUNDS {
        let sc = suites::randomness_cell(upper, E2_TRIALS, suites::RANDOMNESS_SUITE_SEED);
        let exp = run_cell(&sc, &mut violations);
        unresolved.push(unresolved_after(&exp.results, UNRESOLVED_CUTOFF));
        means.push(exp.stats.mean_total_ms);
    }
    let in_band = (UNRESOLVED_BAND_1800.0..=UNRESOLVED_BAND_1800.1).contains(&unresolved[0]);
    let wider_is_safer = unresolved[1] < unresolved[0];
    let u_shape = is_u_shaped(&means);
    let pass = violations.is_empty() && in_band && wider_is_safer && u_shape;
    println!(
        "criterion 3: {} — unresolved@{}ms by upper bound {:.3?}; 1500-1800 in \
         [{}, {}]%: {}, 1500-2000 strictly smaller: {}, mean totals {:.0?} U-shaped: {}",
        verdict(pass),
        UNRESOLVED_CUTOFF / 1000,
        unresolved,
        UNRESOLVED_BAND_1800.0 * 100.0,
        UNRESOLVED_BAND_1800.1 * 100.0,
        in_band,
        wider_is_safer,
        means,
        u_shape
    );
    assert!(pass, "unresolved {unresolved:?}, means {means:?}");
}

#[test]
fn criterion_4_forced_competition_hurts_raft_linearly_and_escape_not_at_all() {
    let mut violations = Vec::new();
    let mut mean = std::collections::BTreeMap::new();
    let mut escape_offenders = 0usize;
    for n in suites::SCALE_SIZES {
        for phases in 0..=3u32 {
            for variant in [Variant::Raft, Variant::Escape] {
                let sc =
                    suites::forced_competition(variant, n, phases, E3_TRIALS, suites::FORCED_SUITE_SEED)
                        .expect("phase counts fit the cluster");
                let exp = run_cell(&sc, &mut violations);
                if variant == Variant::Escape {
                    escape_offenders += exp
                        .results
                        .iter()
                        .filter(|r| !r.total.is_some_and(|t| t < ESCAPE_TOTAL_CEILING))
                        .count();
                }
                mean.insert((variant, n, phases), exp.stats.mean_total_ms);
            }
        }
    }
    let ratio_n8 = mean[&(Variant::Raft, 8, 3)] / mean[&(Variant::Raft, 8, 0)];
    let reductions: Vec<f64> = (1..=3u32)
        .map(|p| 1.0 - mean[&(Variant::Escape, 128, p)] / mean[&(Variant::Raft, 128, p)])
        .collect();
    let floors_met = reductions
        .iter()
        .zip(REDUCTION_FLOORS_N128)
        .all(|(r, floor)| *r >= floor);
    let pass = violations.is_empty()
        && escape_offenders == 0
        && ratio_n8 >= RAFT_P3_OVER_P0_MIN
        && floors_met;
    println!(
        "criterion 4: {} — Escape under {} ms in all {} cells ({} offenders); Raft n=8 \
         3-phase/0-phase ratio {:.2} (need ≥ {}); Escape reductions at n=128 {:.3?} \
         (floors {:?})",
        verdict(pass),
        ESCAPE_TOTAL_CEILING / 1000,
        suites::SCALE_SIZES.len() * 4,
        escape_offenders,
        ratio_n8,
        RAFT_P3_OVER_P0_MIN,
        reductions,
        REDUCTION_FLOORS_N128
    );
    assert!(
        pass,
        "offenders {escape_offenders}, ratio {ratio_n8}, reductions {reductions:?}, \
         violations {violations:?}"
    );
}

#[test]
fn criterion_5_under_heavy_loss_escape_beats_zraft_beats_raft() {
    let mut violations = Vec::new();
    let mut mean = std::collections::BTreeMap::new();
    for n in suites::LOSS_SIZES {
        for loss in suites::LOSS_RATES {
            for variant in [Variant::Raft, Variant::ZRaft, Variant::Escape] {
                let sc = suites::loss_cell(variant, n, loss, E4_TRIALS, suites::LOSS_SUITE_SEED);
                let exp = run_cell(&sc, &mut violations);
                let key = (variant, n, (loss * 10.0).round() as u32);
                mean.insert(key, censored_mean_total_ms(&exp.results, sc.horizon));
            }
        }
    }
    let mut ordered = 0usize;
    let mut cells = 0usize;
    let mut first_breach = None;
    for n in suites::LOSS_SIZES {
        for loss in suites::LOSS_RATES {
            if loss < ORDERING_MIN_LOSS {
                continue;
            }
            cells += 1;
            let d = (loss * 10.0).round() as u32;
            let (e, z, r) = (
                mean[&(Variant::Escape, n, d)],
                mean[&(Variant::ZRaft, n, d)],
                mean[&(Variant::Raft, n, d)],
            );
            if e < z && z < r {
                ordered += 1;
            } else if first_breach.is_none() {
                first_breach = Some(format!(
                    "n={n} loss={loss}: escape {e:.0} z-raft {z:.0} raft {r:.0}"
                ));
            }
        }
    }
    let reductions: Vec<f64> = suites::LOSS_RATES
        .iter()
        .map(|loss| {
            let d = (loss * 10.0).round() as u32;
            1.0 - mean[&(Variant::Escape, 100, d)] / mean[&(Variant::Raft, 100, d)]
        })
        .collect();
    let monotone = reductions.windows(2).all(|w| w[1] >= w[0]);
    let floor_met = *reductions.last().unwrap() >= REDUCTION_FLOOR_N100_D40;
    let pass = violations.is_empty() && ordered == cells && monotone && floor_met;
    println!(
        "criterion 5: {} — escape < z-raft < raft ordering holds in {ordered}/{cells} \
         lossy cells (first breach: {}); n=100 reduction vs loss {:.3?}, monotone: {}, \
         ≥ {} at Δ=0.4: {}",
        verdict(pass),
        first_breach.as_deref().unwrap_or("none"),
        reductions,
        monotone,
        REDUCTION_FLOOR_N100_D40,
        floor_met
    );
    assert!(
        pass,
        "ordered {ordered}/{cells} ({first_breach:?}), reductions {reductions:?}, \
         violations {violations:?}"
    );
}

#[test]
fn criterion_6_every_invariant_holds_across_the_theorem_battery() {
    let mut violations = Vec::new();
    let mut trials = 0usize;
    let mut qualifying = 0usize;
    let mut multi_campaign = 0usize;

    for variant in [Variant::Raft, Variant::ZRaft, Variant::Escape] {
        for n in [5u32, 8, 16] {
            let sc = suites::leader_crash(variant, n, 100, suites::CRASH_SUITE_SEED);
            let exp = run_cell(&sc, &mut violations);
            trials += exp.results.len();
            if variant != Variant::Raft {
                // Fault-free election (the crash precedes it): priority
                // variants must need exactly one campaign.
                for r in &exp.results {
                    qualifying += 1;
                    if r.campaigns != 1 {
                        multi_campaign += 1;
                    }
                }
            }
        }
        for n in [5u32, 8] {
            let sc = suites::cold_start(variant, n, 50, suites::GOLDEN_SEED);
            let exp = run_cell(&sc, &mut violations);
            trials += exp.results.len();
            if variant != Variant::Raft {
                for r in &exp.results {
                    qualifying += 1;
                    if r.campaigns != 1 {
                        multi_campaign += 1;
                    }
                }
            }
        }
    }

    // Crash the leader and the best follower in the same instant: the
    // strongest case for the f+1 campaign bound.
    let sc = suites::adversarial_top_two(50, suites::GOLDEN_SEED);
    trials += run_cell(&sc, &mut violations).results.len();

    // Loss keeps the checker's uniqueness and quorum accounting honest.
    for variant in [Variant::ZRaft, Variant::Escape] {
        let sc = suites::loss_cell(variant, 10, 0.3, 50, suites::LOSS_SUITE_SEED);
        trials += run_cell(&sc, &mut violations).results.len();
    }

    // Crash-and-rejoin traffic exercises the configuration-clock rules.
    let sc = suites::stale_clock_showcase(suites::GOLDEN_SEED);
    let out = run_trial(&sc, 0).expect("showcase runs");
    trials += 1;
    violations.extend(out.violations.iter().map(|v| format!("{}: {v}", sc.name)));

    let pass = violations.is_empty() && multi_campaign == 0;
    println!(
        "criterion 6: {} — {trials} trials across the battery, {} invariant \
         violations; one-campaign elections in {}/{} qualifying trials",
        verdict(pass),
        violations.len(),
        qualifying - multi_campaign,
        qualifying
    );
    assert!(pass, "violations: {violations:?}, multi-campaign: {multi_campaign}");
}

#[test]
fn criterion_7_reruns_of_the_same_trial_are_byte_identical() {
    let scenarios = [
        suites::leader_crash(Variant::Escape, 8, RERUN_TRIALS, suites::CRASH_SUITE_SEED),
        suites::loss_cell(Variant::Raft, 10, 0.4, RERUN_TRIALS, suites::LOSS_SUITE_SEED),
        suites::leader_crash(Variant::ZRaft, 16, RERUN_TRIALS, suites::CRASH_SUITE_SEED),
    ];
    let mut pairs = 0usize;
    let mut mismatches = 0usize;
    for sc in &scenarios {
        for trial in 0..RERUN_TRIALS {
            let a = run_trial(sc, trial).expect("trial runs");
            let b = run_trial(sc, trial).expect("trial runs");
            pairs += 1;
            if a.trace.to_ndjson() != b.trace.to_ndjson() || a.result != b.result {
                mismatches += 1;
            }
        }
    }
    let cell = &scenarios[0];
    let par = run_experiment(cell).expect("parallel run");
    let seq = run_experiment_sequential(cell).expect("sequential run");
    let runners_agree = par.results == seq.results;

    let pass = mismatches == 0 && runners_agree;
    println!(
        "criterion 7: {} — {pairs} re-run pairs byte-identical ({mismatches} \
         mismatches); parallel and sequential runners agree row-for-row: {runners_agree}",
        verdict(pass)
    );
    assert!(pass);
}

#[test]
fn criterion_8_inert_priority_machinery_reduces_to_fixed_timeout_raft() {
    let mut identical = 0u64;
    for seed in 0..DEGENERACY_SEEDS {
        let (degenerate_escape, fixed_raft) = suites::degeneracy_pair(seed);
        let a = run_trial(&degenerate_escape, 0).expect("degenerate trial runs");
        let b = run_trial(&fixed_raft, 0).expect("fixed-timeout trial runs");
        if a.trace.to_ndjson() == b.trace.to_ndjson() {
            identical += 1;
        }
    }
    let pass = identical == DEGENERACY_SEEDS;
    println!(
        "criterion 8: {} — {identical}/{DEGENERACY_SEEDS} seeded five-server scenarios \
         produce bit-identical traces",
        verdict(pass)
    );
    assert!(pass);
}
