//! Experiment-level aggregation: means, percentiles, convergence CDF, and
//! the split-vote rate, computed over a batch of trial results.

use serde::Serialize;

use crate::protocol::Micros;

use super::metrics::TrialResult;

/// Step width of the convergence CDF grid.
pub const CDF_STEP: Micros = crate::protocol::ms(50);

/// Aggregate view of one experiment cell. Duration statistics cover
/// converged trials only; rates are over all trials.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryStats {
    pub trials: usize,
    pub converged: usize,
    pub non_convergence_rate: f64,
    pub mean_total_ms: f64,
    pub p50_total_ms: f64,
    pub p90_total_ms: f64,
    pub p99_total_ms: f64,
    pub mean_detection_ms: f64,
    pub mean_election_ms: f64,
    pub mean_campaigns: f64,
    pub mean_messages: f64,
    /// Fraction of trials that hit at least one split-vote phase.
    pub split_vote_rate: f64,
    /// Convergence CDF on a 50 ms grid: (time since anchor in ms, fraction
    /// of all trials converged by then). The last point is the overall
    /// convergence fraction.
    pub cdf: Vec<(u64, f64)>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Nearest-rank percentile of a sorted slice; `q` in (0, 1].
fn percentile(sorted: &[Micros], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1] as f64 / 1000.0
}

pub fn summarize(results: &[TrialResult]) -> SummaryStats {
    let trials = results.len();
    let converged: Vec<&TrialResult> = results.iter().filter(|r| r.converged).collect();

    let mut totals: Vec<Micros> = converged.iter().filter_map(|r| r.total).collect();
    totals.sort_unstable();

    let horizon_hit = totals.last().copied().unwrap_or(0);
    let grid_end = horizon_hit.div_ceil(CDF_STEP).max(1) * CDF_STEP;
    let cdf = (0..=grid_end / CDF_STEP)
        .map(|i| {
            let t = i * CDF_STEP;
            let frac = totals.partition_point(|&v| v <= t) as f64 / trials.max(1) as f64;
            (t / 1000, frac)
        })
        .collect();

    let split_trials = results
        .iter()
        .filter(|r| r.split_vote_phases > 0)
        .count();

    SummaryStats {
        trials,
        converged: converged.len(),
        non_convergence_rate: (trials - converged.len()) as f64 / trials.max(1) as f64,
        mean_total_ms: mean(totals.iter().map(|&v| v as f64 / 1000.0)),
        p50_total_ms: percentile(&totals, 0.50),
        p90_total_ms: percentile(&totals, 0.90),
        p99_total_ms: percentile(&totals, 0.99),
        mean_detection_ms: mean(
            converged
                .iter()
                .filter_map(|r| r.detection)
                .map(|v| v as f64 / 1000.0),
        ),
        mean_election_ms: mean(
            converged
                .iter()
                .filter_map(|r| r.election)
                .map(|v| v as f64 / 1000.0),
        ),
        mean_campaigns: mean(results.iter().map(|r| r.campaigns as f64)),
        mean_messages: mean(results.iter().map(|r| r.messages as f64)),
        split_vote_rate: split_trials as f64 / trials.max(1) as f64,
        cdf,
    }
}

/// Fraction of trials still unresolved `threshold` after the anchor: never
/// converged, or converged later than that.
pub fn unresolved_after(results: &[TrialResult], threshold: Micros) -> f64 {
    if results.is_empty() {
        return f64::NAN;
    }
    let late = results
        .iter()
        .filter(|r| match r.total {
            Some(t) => t > threshold,
            None => true,
        })
        .count();
    late as f64 / results.len() as f64
}

/// Mean total time with horizon censoring: a trial that never converged (or
/// converged past the horizon) counts as the horizon itself. This keeps
/// scenario comparisons meaningful when one side routinely fails to resolve
/// in time — an uncensored mean over the few lucky convergences would
/// flatter exactly the runs that performed worst.
pub fn censored_mean_total_ms(results: &[TrialResult], horizon: Micros) -> f64 {
    if results.is_empty() {
        return f64::NAN;
    }
    let sum: f64 = results
        .iter()
        .map(|r| r.total.unwrap_or(horizon).min(horizon) as f64 / 1000.0)
        .sum();
    sum / results.len() as f64
}
