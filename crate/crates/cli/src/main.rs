//! `escape-sim`: run leader-election scenarios and experiment suites.
//!
//! Two commands: `run <file>` executes one scenario document, `suite <name>`
//! materializes a whole experiment matrix (e1–e4) or the scripted golden
//! scenarios. Every run writes per-trial CSV rows and a JSON summary (with
//! CDF points) under `--out`; `--trace` additionally writes one NDJSON
//! trace per trial. The exit status is zero only if every trial of every
//! scenario passed the full invariant checker.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use escape_core::harness::{
    censored_mean_total_ms, run_experiment, run_experiment_sequential, run_trial, suites,
    ExperimentResult, Scenario, Violation,
};
use escape_core::protocol::{DenyReason, Variant};
use escape_core::simnet::Event;
use escape_sim::{results, scenario_file};

#[derive(Parser)]
#[command(name = "escape-sim", version, about = "Leader-election simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Directory for result files (created if missing).
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Override the trial count of every scenario run.
    #[arg(long, global = true)]
    trials: Option<u32>,
    /// Override the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trials: 0 = all cores, 1 = sequential.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Also write one NDJSON trace file per trial.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario file.
    Run {
        file: PathBuf,
        /// Override the cluster size.
        #[arg(long)]
        n: Option<u32>,
        /// Override the protocol variant: raft, z-raft or escape.
        #[arg(long)]
        variant: Option<Variant>,
        /// Override the broadcast loss rate.
        #[arg(long)]
        loss_rate: Option<f64>,
    },
    /// Run a named suite: e1, e2, e3, e4 or golden.
    Suite { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(violations) => {
            eprintln!("{violations} invariant violation(s); see messages above");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<usize> {
    std::fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    match &cli.cmd {
        Cmd::Run {
            file,
            n,
            variant,
            loss_rate,
        } => {
            let name = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario")
                .to_string();
            let mut sc = scenario_file::ScenarioFile::load(file)?.into_scenario(&name)?;
            // Command-line overrides beat file values.
            if let Some(v) = *variant {
                sc.variant = v;
            }
            if let Some(n) = *n {
                sc.n = n;
            }
            if let Some(d) = *loss_rate {
                sc.loss_rate = d;
            }
            apply_common_overrides(&mut sc, &cli);
            let res = execute(&sc, cli.workers)?;
            let violations = save_and_report(&cli, &sc, &res)?;
            Ok(violations)
        }
        Cmd::Suite { name } => run_suite(name, &cli),
    }
}

fn apply_common_overrides(sc: &mut Scenario, cli: &Cli) {
    if let Some(t) = cli.trials {
        sc.trials = t;
    }
    if let Some(s) = cli.seed {
        sc.base_seed = s;
    }
}

/// Run one scenario on the requested worker count.
fn execute(sc: &Scenario, workers: usize) -> Result<ExperimentResult> {
    let res = match workers {
        1 => run_experiment_sequential(sc)?,
        0 => run_experiment(sc)?,
        w => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .context("cannot build worker pool")?
            .install(|| run_experiment(sc))?,
    };
    Ok(res)
}

/// Write CSV + summary (+ traces on request), print the one-line digest and
/// any violations; returns the violation count.
fn save_and_report(cli: &Cli, sc: &Scenario, res: &ExperimentResult) -> Result<usize> {
    results::write_csv(&cli.out.join(format!("{}.csv", res.scenario)), &res.results)?;
    results::write_summary(
        &cli.out.join(format!("{}.summary.json", res.scenario)),
        &res.scenario,
        &res.stats,
        res.violations.len(),
    )?;
    if cli.trace {
        for trial in 0..sc.trials {
            let out = run_trial(sc, trial)?;
            let path = cli
                .out
                .join(format!("{}.trial-{trial}.trace.ndjson", res.scenario));
            std::fs::write(&path, out.trace.to_ndjson())
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    let s = &res.stats;
    println!(
        "{}: {} trials, {:.1}% converged, mean {:.1} ms, split rate {:.1}%, {} violation(s)",
        res.scenario,
        s.trials,
        (1.0 - s.non_convergence_rate) * 100.0,
        s.mean_total_ms,
        s.split_vote_rate * 100.0,
        res.violations.len(),
    );
    report_violations(&res.violations);
    Ok(res.violations.len())
}

fn report_violations(violations: &[Violation]) {
    for v in violations.iter().take(10) {
        eprintln!("violation: {v}");
    }
    if violations.len() > 10 {
        eprintln!("... and {} more", violations.len() - 10);
    }
}

fn run_suite(name: &str, cli: &Cli) -> Result<usize> {
    match name.to_ascii_lowercase().as_str() {
        "e1" => suite_e1(cli),
        "e2" => suite_e2(cli),
        "e3" => suite_e3(cli),
        "e4" => suite_e4(cli),
        "golden" => suite_golden(cli),
        other => bail!("unknown suite {other:?} (expected e1, e2, e3, e4 or golden)"),
    }
}

fn seed_for(cli: &Cli, default: u64) -> u64 {
    cli.seed.unwrap_or(default)
}

/// Leader-crash scale sweep: all three variants across cluster sizes.
fn suite_e1(cli: &Cli) -> Result<usize> {
    let trials = cli.trials.unwrap_or(1000);
    let seed = seed_for(cli, suites::CRASH_SUITE_SEED);
    let mut violations = 0;
    let mut rows = vec![vec![
        "n".to_string(),
        "raft ms".into(),
        "raft split %".into(),
        "z-raft ms".into(),
        "z-raft split %".into(),
        "escape ms".into(),
        "escape split %".into(),
    ]];
    for n in suites::SCALE_SIZES {
        let mut row = vec![n.to_string()];
        for variant in [Variant::Raft, Variant::ZRaft, Variant::Escape] {
            let sc = suites::leader_crash(variant, n, trials, seed);
            let res = execute(&sc, cli.workers)?;
            violations += save_and_report(cli, &sc, &res)?;
            row.push(format!("{:.1}", res.stats.mean_total_ms));
            row.push(format!("{:.1}", res.stats.split_vote_rate * 100.0));
        }
        rows.push(row);
    }
    finish_table(cli, "e1", rows)?;
    Ok(violations)
}

/// Timeout-randomness sweep on five-server Raft.
fn suite_e2(cli: &Cli) -> Result<usize> {
    let trials = cli.trials.unwrap_or(3000);
    let seed = seed_for(cli, suites::RANDOMNESS_SUITE_SEED);
    let mut violations = 0;
    let mut rows = vec![vec![
        "range ms".to_string(),
        "mean ms".into(),
        "unresolved@3500 %".into(),
        "split %".into(),
    ]];
    for upper in suites::RANDOMNESS_UPPER_BOUNDS {
        let sc = suites::randomness_cell(upper, trials, seed);
        let res = execute(&sc, cli.workers)?;
        violations += save_and_report(cli, &sc, &res)?;
        let unresolved =
            escape_core::harness::unresolved_after(&res.results, escape_core::protocol::ms(3500));
        rows.push(vec![
            format!("1500-{}", upper / 1000),
            format!("{:.1}", res.stats.mean_total_ms),
            format!("{:.1}", unresolved * 100.0),
            format!("{:.1}", res.stats.split_vote_rate * 100.0),
        ]);
    }
    finish_table(cli, "e2", rows)?;
    Ok(violations)
}

/// Forced competing-phase sweep, Raft vs Escape.
fn suite_e3(cli: &Cli) -> Result<usize> {
    let trials = cli.trials.unwrap_or(300);
    let seed = seed_for(cli, suites::FORCED_SUITE_SEED);
    let mut violations = 0;
    let mut rows = vec![vec![
        "n".to_string(),
        "phases".into(),
        "raft ms".into(),
        "escape ms".into(),
        "reduction %".into(),
    ]];
    for n in suites::SCALE_SIZES {
        for phases in 0..=3 {
            let mut means = [0.0f64; 2];
            for (slot, variant) in [Variant::Raft, Variant::Escape].into_iter().enumerate() {
                let sc = suites::forced_competition(variant, n, phases, trials, seed)?;
                let res = execute(&sc, cli.workers)?;
                violations += save_and_report(cli, &sc, &res)?;
                means[slot] = res.stats.mean_total_ms;
            }
            rows.push(vec![
                n.to_string(),
                phases.to_string(),
                format!("{:.1}", means[0]),
                format!("{:.1}", means[1]),
                format!("{:.1}", (1.0 - means[1] / means[0]) * 100.0),
            ]);
        }
    }
    finish_table(cli, "e3", rows)?;
    Ok(violations)
}

/// Message-loss sweep across all variants. Means are horizon-censored so
/// non-converged trials weigh in at the full horizon instead of vanishing.
fn suite_e4(cli: &Cli) -> Result<usize> {
    let trials = cli.trials.unwrap_or(200);
    let seed = seed_for(cli, suites::LOSS_SUITE_SEED);
    let mut violations = 0;
    let mut rows = vec![vec![
        "n".to_string(),
        "loss".into(),
        "raft ms".into(),
        "z-raft ms".into(),
        "escape ms".into(),
    ]];
    for n in suites::LOSS_SIZES {
        for loss in suites::LOSS_RATES {
            let mut row = vec![n.to_string(), format!("{loss:.1}")];
            for variant in [Variant::Raft, Variant::ZRaft, Variant::Escape] {
                let sc = suites::loss_cell(variant, n, loss, trials, seed);
                let res = execute(&sc, cli.workers)?;
                violations += save_and_report(cli, &sc, &res)?;
                row.push(format!(
                    "{:.1}",
                    censored_mean_total_ms(&res.results, sc.horizon)
                ));
            }
            rows.push(row);
        }
    }
    finish_table(cli, "e4", rows)?;
    Ok(violations)
}

/// The scripted single-trace scenarios, checked against their canonical
/// outcomes. Any deviation counts as a failure for the exit status.
fn suite_golden(cli: &Cli) -> Result<usize> {
    let mut failures = 0;

    let sc = suites::split_vote_showcase(suites::SPLIT_VOTE_SEED);
    let out = run_trial(&sc, 0)?;
    let votes_match = has_vote(&out.trace.events, 2, 3, 2) && has_vote(&out.trace.events, 5, 4, 2);
    failures += golden_line(
        &sc.name,
        "servers 3 and 4 split term 2 (S2 votes S3, S5 votes S4); S3 wins term 3",
        out.violations.is_empty()
            && votes_match
            && out.result.winner == Some(3)
            && out.result.split_vote_phases == 1,
    );
    save_golden_trace(cli, &sc.name, &out.trace)?;

    let sc = suites::stale_clock_showcase(suites::GOLDEN_SEED);
    let out = run_trial(&sc, 0)?;
    let stale_denials = out
        .trace
        .events
        .iter()
        .filter(|ev| {
            matches!(
                ev,
                Event::VoteDenied {
                    candidate: 4,
                    reason: DenyReason::StaleClock,
                    ..
                }
            )
        })
        .count();
    failures += golden_line(
        &sc.name,
        "rejoined server 4 denied on stale clock by all voters; server 3 wins",
        out.violations.is_empty()
            && stale_denials == 3
            && out.result.winner == Some(3)
            && out.result.campaigns == 3,
    );
    save_golden_trace(cli, &sc.name, &out.trace)?;

    let sc = suites::adversarial_top_two(20, seed_for(cli, suites::GOLDEN_SEED));
    let mut ok = true;
    for trial in 0..sc.trials {
        let out = run_trial(&sc, trial)?;
        ok &= out.violations.is_empty()
            && out.result.converged
            && out.result.campaigns <= 3
            && out.result.winner == Some(3);
    }
    failures += golden_line(
        &sc.name,
        "leader + best follower crash together; recovery within f+1 campaigns",
        ok,
    );

    let mut identical = 0;
    for seed in 0..25 {
        let (esc, raft) = suites::degeneracy_pair(seed);
        let a = run_trial(&esc, 0)?;
        let b = run_trial(&raft, 0)?;
        if a.trace.to_ndjson() == b.trace.to_ndjson() {
            identical += 1;
        }
    }
    failures += golden_line(
        "degeneracy-pair",
        "inert priority machinery is byte-identical to fixed-timeout behavior (25 seeds)",
        identical == 25,
    );

    Ok(failures)
}

fn has_vote(events: &[Event], voter: u32, cand: u32, in_term: u64) -> bool {
    events.iter().any(|ev| {
        matches!(ev, Event::VoteGranted { server, candidate, term, .. }
            if *server == voter && *candidate == cand && *term == in_term)
    })
}

fn golden_line(name: &str, what: &str, pass: bool) -> usize {
    println!("{}: {name} — {what}", if pass { "PASS" } else { "FAIL" });
    usize::from(!pass)
}

fn save_golden_trace(cli: &Cli, name: &str, trace: &escape_core::simnet::Trace) -> Result<()> {
    let path = cli.out.join(format!("{name}.trace.ndjson"));
    std::fs::write(&path, trace.to_ndjson())
        .with_context(|| format!("cannot write {}", path.display()))
}

fn finish_table(cli: &Cli, suite: &str, rows: Vec<Vec<String>>) -> Result<()> {
    let table = results::format_table(&rows);
    print!("{table}");
    let path = cli.out.join(format!("{suite}-table.txt"));
    std::fs::write(&path, table).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
