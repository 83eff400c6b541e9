//! Result files: per-trial CSV rows, a JSON summary with the CDF points,
//! NDJSON traces, and plain-text comparison tables for the suites.

use std::path::Path;

use anyhow::{Context, Result};
use escape_core::harness::{SummaryStats, TrialResult};
use escape_core::protocol::Micros;
use serde::Serialize;

pub const CSV_HEADER: [&str; 12] = [
    "trial",
    "variant",
    "n",
    "seed",
    "converged",
    "detection_ms",
    "election_ms",
    "total_ms",
    "campaigns",
    "split_vote_phases",
    "winner",
    "messages",
];

/// Microseconds as a millisecond string with three decimals — exact, since
/// a microsecond is one thousandth of a millisecond.
fn fmt_ms(v: Micros) -> String {
    format!("{}.{:03}", v / 1000, v % 1000)
}

fn parse_ms(s: &str) -> Result<Option<Micros>> {
    if s.is_empty() {
        return Ok(None);
    }
    let (whole, frac) = s.split_once('.').unwrap_or((s, "0"));
    anyhow::ensure!(frac.len() <= 3, "more than microsecond precision: {s}");
    let whole: u64 = whole.parse()?;
    let frac: u64 = format!("{frac:0<3}").parse()?;
    Ok(Some(whole * 1000 + frac))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv(path: &Path, results: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.trial.to_string(),
            r.variant.name().to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.converged.to_string(),
            opt(r.detection.map(fmt_ms)),
            opt(r.election.map(fmt_ms)),
            opt(r.total.map(fmt_ms)),
            r.campaigns.to_string(),
            r.split_vote_phases.to_string(),
            opt(r.winner),
            r.messages.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a results CSV back into trial rows; exact inverse of [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<TrialResult>> {
    let mut rd = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for record in rd.records() {
        let rec = record?;
        anyhow::ensure!(rec.len() == CSV_HEADER.len(), "malformed row: {rec:?}");
        let get = |i: usize| rec.get(i).unwrap();
        out.push(TrialResult {
            trial: get(0).parse()?,
            variant: get(1).parse().map_err(anyhow::Error::msg)?,
            n: get(2).parse()?,
            seed: get(3).parse()?,
            converged: get(4).parse()?,
            detection: parse_ms(get(5))?,
            election: parse_ms(get(6))?,
            total: parse_ms(get(7))?,
            campaigns: get(8).parse()?,
            split_vote_phases: get(9).parse()?,
            winner: if get(10).is_empty() {
                None
            } else {
                Some(get(10).parse()?)
            },
            messages: get(11).parse()?,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    violations: usize,
    #[serde(flatten)]
    stats: &'a SummaryStats,
}

pub fn write_summary(
    path: &Path,
    scenario: &str,
    stats: &SummaryStats,
    violations: usize,
) -> Result<()> {
    let doc = Summary {
        scenario,
        violations,
        stats,
    };
    std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Fixed-width text table; first row is the header.
pub fn format_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{:>w$}", cell, w = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use escape_core::protocol::{ms, Variant};

    #[test]
    fn csv_rows_round_trip_exactly() {
        let rows = vec![
            TrialResult {
                trial: 0,
                variant: Variant::Escape,
                n: 5,
                seed: 42,
                converged: true,
                detection: Some(ms(1101) + 250),
                election: Some(301_007),
                total: Some(ms(1402) + 257),
                campaigns: 1,
                split_vote_phases: 0,
                winner: Some(4),
                messages: 16,
            },
            TrialResult {
                trial: 1,
                variant: Variant::ZRaft,
                n: 5,
                seed: 43,
                converged: false,
                detection: Some(ms(990)),
                election: None,
                total: None,
                campaigns: 7,
                split_vote_phases: 2,
                winner: None,
                messages: 230,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("trial,variant,n,seed,converged,detection_ms,"));
        assert!(text.contains("1101.250"));
        let back = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn millisecond_strings_are_exact() {
        assert_eq!(fmt_ms(1_500_000), "1500.000");
        assert_eq!(fmt_ms(42), "0.042");
        assert_eq!(parse_ms("1500.000").unwrap(), Some(1_500_000));
        assert_eq!(parse_ms("0.042").unwrap(), Some(42));
        assert_eq!(parse_ms("").unwrap(), None);
    }

    #[test]
    fn tables_align_columns() {
        let t = format_table(&[
            vec!["n".into(), "mean".into()],
            vec!["8".into(), "1413".into()],
            vec!["128".into(), "2943".into()],
        ]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "  n  mean");
        assert_eq!(lines[2], "  8  1413");
        assert_eq!(lines[3], "128  2943");
    }
}
