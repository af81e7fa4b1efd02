//! CSV and table emitters, configuration parsing, and the oracle audit.

mod audit;
mod config;

use std::io::{Read, Write};

use thiserror::Error;

use crate::harness::{grid, rank_table, sort_summaries, RuleSummary};
use crate::rules::RuleId;
use crate::seqgen::SequenceModel;

pub use audit::{oracle_audit, AuditError, AuditLine, AuditReport, AUDIT_Z_LIMIT};
pub use config::{
    parse_config, parse_config_with, AuditOptions, Command, ConfigError, OutputFormat, RunOptions,
    DEFAULT_AUDIT_REPS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("no summaries for model {0}")]
    NoData(String),
    #[error("missing summary for rule {rule} at n = {n}")]
    MissingCell { rule: RuleId, n: usize },
    #[error("malformed CSV: {0}")]
    Malformed(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<csv::Error> for ReportError {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            ReportError::Io(err.to_string())
        } else {
            ReportError::Malformed(err.to_string())
        }
    }
}

impl From<std::io::Error> for ReportError {
    fn from(err: std::io::Error) -> Self {
        ReportError::Io(err.to_string())
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "model",
    "n",
    "rule",
    "success_rate",
    "success_se",
    "avg_stop",
    "stop_se",
    "forced_fraction",
    "reps",
    "seed",
];

/// Which of the two reported metrics a table shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Success,
    StopTime,
}

/// Rounds half away from zero to `decimals` places and formats.
pub fn format_fixed(value: f64, decimals: i32) -> String {
    let scale = 10f64.powi(decimals);
    let rounded = (value * scale).round() / scale;
    format!("{:.*}", decimals as usize, rounded)
}

/// Success rate as a percentage with two decimals.
pub fn format_percent(rate: f64) -> String {
    format_fixed(rate * 100.0, 2)
}

/// Writes summaries as CSV sorted by (model, n, rule). Floats use the
/// shortest representation that parses back to the same value.
pub fn emit_csv<W: Write>(summaries: &[RuleSummary], writer: W) -> Result<(), ReportError> {
    let mut rows = summaries.to_vec();
    sort_summaries(&mut rows);
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    out.write_record(CSV_HEADER)?;
    for s in &rows {
        out.write_record([
            s.model.to_string(),
            s.n.to_string(),
            s.rule.label().to_string(),
            s.success_rate.to_string(),
            s.success_se.to_string(),
            s.avg_stop.to_string(),
            s.stop_se.to_string(),
            s.forced_fraction.to_string(),
            s.reps.to_string(),
            s.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string(summaries: &[RuleSummary]) -> Result<String, ReportError> {
    let mut buf = Vec::new();
    emit_csv(summaries, &mut buf)?;
    String::from_utf8(buf).map_err(|e| ReportError::Malformed(e.to_string()))
}

/// Parses CSV produced by [`emit_csv`].
pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<RuleSummary>, ReportError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(ReportError::Malformed(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or_default();
        fn num<T: std::str::FromStr>(s: &str) -> Result<T, ReportError> {
            s.parse()
                .map_err(|_| ReportError::Malformed(format!("bad number `{s}`")))
        }
        out.push(RuleSummary {
            model: field(0)
                .parse::<SequenceModel>()
                .map_err(|e| ReportError::Malformed(e.to_string()))?,
            n: num(field(1))?,
            rule: field(2)
                .parse::<RuleId>()
                .map_err(|e| ReportError::Malformed(e.to_string()))?,
            success_rate: num(field(3))?,
            success_se: num(field(4))?,
            avg_stop: num(field(5))?,
            stop_se: num(field(6))?,
            forced_fraction: num(field(7))?,
            reps: num(field(8))?,
            seed: num(field(9))?,
        });
    }
    Ok(out)
}

fn format_rank_sum(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

/// Markdown emphasis: `**x**` for top three, `**<u>x</u>**` for the best.
fn mark_rank(text: String, rank: f64) -> String {
    if rank <= 1.0 {
        format!("**<u>{text}</u>**")
    } else if rank <= 3.0 {
        format!("**{text}**")
    } else {
        text
    }
}

/// Renders one model's success-rate or stopping-time table in markdown.
///
/// Success tables mark the top three per column in bold and the best with an
/// additional underline, and end with the rank-sum column (also marked,
/// smaller is better). Stopping-time tables bold each column's minimum and
/// maximum.
pub fn emit_table(
    summaries: &[RuleSummary],
    metric: Metric,
    model: SequenceModel,
) -> Result<String, ReportError> {
    let (n_values, rules, rows) = grid(summaries, model)?;
    let mut out = String::new();
    let title = match metric {
        Metric::Success => format!("Success Rate by Rule (%) in {}", model.title()),
        Metric::StopTime => format!("Average Stopping Time in {}", model.title()),
    };
    out.push_str(&format!("### {title}\n\n"));

    let mut header = vec!["Rule".to_string()];
    header.extend(
        n_values
            .iter()
            .enumerate()
            .map(|(j, n)| if j == 0 { format!("n={n}") } else { n.to_string() }),
    );
    if metric == Metric::Success {
        header.push("Sum(rank)".to_string());
    }
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!(
        "|{}|\n",
        std::iter::once(":---".to_string())
            .chain(std::iter::repeat_n("---:".to_string(), header.len() - 1))
            .collect::<Vec<_>>()
            .join("|")
    ));

    match metric {
        Metric::Success => {
            let ranks = rank_table(summaries, model)?;
            let sum_ranks = crate::harness::average_ranks(
                &ranks.rank_sums.iter().map(|s| -s).collect::<Vec<_>>(),
            );
            for (i, rule) in rules.iter().enumerate() {
                let mut cells = vec![format!("{}) {}", rule.catalog_index() + 1, rule.label())];
                for (j, cell) in rows[i].iter().enumerate() {
                    cells.push(mark_rank(format_percent(cell.success_rate), ranks.ranks[i][j]));
                }
                cells.push(mark_rank(format_rank_sum(ranks.rank_sums[i]), sum_ranks[i]));
                out.push_str(&format!("| {} |\n", cells.join(" | ")));
            }
        }
        Metric::StopTime => {
            let extremes: Vec<(f64, f64)> = (0..n_values.len())
                .map(|j| {
                    rows.iter().map(|row| row[j].avg_stop).fold(
                        (f64::INFINITY, f64::NEG_INFINITY),
                        |(lo, hi), v| (lo.min(v), hi.max(v)),
                    )
                })
                .collect();
            for (i, rule) in rules.iter().enumerate() {
                let mut cells = vec![format!("{}) {}", rule.catalog_index() + 1, rule.label())];
                for (j, cell) in rows[i].iter().enumerate() {
                    let text = format_fixed(cell.avg_stop, 2);
                    let (lo, hi) = extremes[j];
                    if rules.len() > 1 && (cell.avg_stop == lo || cell.avg_stop == hi) {
                        cells.push(format!("**{text}**"));
                    } else {
                        cells.push(text);
                    }
                }
                out.push_str(&format!("| {} |\n", cells.join(" | ")));
            }
        }
    }
    Ok(out)
}

/// Both tables for every model present in `summaries`, in catalog order.
pub fn emit_all_tables(summaries: &[RuleSummary]) -> Result<String, ReportError> {
    let mut models: Vec<SequenceModel> = Vec::new();
    for s in summaries {
        if !models.contains(&s.model) {
            models.push(s.model);
        }
    }
    models.sort_by_key(|m| m.sort_key());
    let mut out = String::new();
    for metric in [Metric::Success, Metric::StopTime] {
        for &model in &models {
            out.push_str(&emit_table(summaries, metric, model)?);
            out.push('\n');
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell(rule: RuleId, model: SequenceModel, n: usize, rate: f64, stop: f64) -> RuleSummary {
        RuleSummary {
            rule,
            model,
            n,
            success_rate: rate,
            success_se: (rate * (1.0 - rate) / 1e4).sqrt(),
            avg_stop: stop,
            stop_se: 0.1,
            forced_fraction: 0.0,
            reps: 10_000,
            seed: 7,
        }
    }

    fn full_grid(model: SequenceModel) -> Vec<RuleSummary> {
        let mut out = Vec::new();
        for (j, n) in [50usize, 100, 200, 500, 1000].into_iter().enumerate() {
            for rule in RuleId::ALL {
                let i = rule.catalog_index() as f64;
                out.push(cell(
                    rule,
                    model,
                    n,
                    0.36 + 0.001 * ((i + j as f64) % 8.0),
                    0.75 * n as f64 + i,
                ));
            }
        }
        out
    }

    #[test]
    fn percent_rounding_half_away_from_zero() {
        assert_eq!(format_percent(0.37125), "37.13");
        assert_eq!(format_percent(0.3732), "37.32");
        assert_eq!(format_percent(1.0), "100.00");
        assert_eq!(format_fixed(78.545, 2), "78.55");
        assert_eq!(format_fixed(-0.125, 2), "-0.13");
    }

    #[test]
    fn csv_single_row() {
        let s = cell(RuleId::Exact, SequenceModel::Uniform01, 100, 0.3732, 75.19);
        let text = csv_string(&[s]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].starts_with("uniform,100,Exact,0.3732,"));
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_rows_sorted_by_catalog() {
        let mut rows = full_grid(SequenceModel::Ar1 { phi: 0.5 });
        rows.extend(full_grid(SequenceModel::Uniform01));
        rows.reverse();
        let parsed = parse_csv(csv_string(&rows).unwrap().as_bytes()).unwrap();
        assert_eq!(parsed[0].model, SequenceModel::Uniform01);
        assert_eq!(parsed[0].n, 50);
        assert_eq!(parsed[0].rule, RuleId::Exact);
        assert_eq!(parsed[7].rule, RuleId::Ensemble);
        assert_eq!(parsed.last().unwrap().model, SequenceModel::Ar1 { phi: 0.5 });
    }

    #[test]
    fn success_table_layout() {
        let rows = full_grid(SequenceModel::Uniform01);
        let table = emit_table(&rows, Metric::Success, SequenceModel::Uniform01).unwrap();
        let lines: Vec<&str> = table.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(lines.len(), 2 + 8);
        assert!(lines[0].contains("Sum(rank)"));
        assert_eq!(lines[2].matches('|').count(), 1 + 1 + 5 + 1);
        assert!(lines[2].starts_with("| 1) Exact"));
        assert!(lines[9].starts_with("| 8) VE"));
        assert!(table.contains("**<u>"));
        // Printed rank sums equal the sum of per-n ranks.
        let ranks = rank_table(&rows, SequenceModel::Uniform01).unwrap();
        for (i, row) in ranks.ranks.iter().enumerate() {
            assert_eq!(row.iter().sum::<f64>(), ranks.rank_sums[i]);
            assert!(lines[2 + i].contains(&format_rank_sum(ranks.rank_sums[i])));
        }
    }

    #[test]
    fn stoptime_table_marks_extremes() {
        let rows = full_grid(SequenceModel::StandardNormal);
        let table = emit_table(&rows, Metric::StopTime, SequenceModel::StandardNormal).unwrap();
        let lines: Vec<&str> = table.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(lines.len(), 10);
        assert!(!lines[0].contains("Sum(rank)"));
        // Exact has the smallest, VE the largest stopping time in every column.
        assert_eq!(lines[2].matches("**").count(), 10);
        assert_eq!(lines[9].matches("**").count(), 10);
        assert_eq!(lines[4].matches("**").count(), 0);
    }

    #[test]
    fn single_rule_table() {
        let rows: Vec<RuleSummary> = full_grid(SequenceModel::Uniform01)
            .into_iter()
            .filter(|s| s.rule == RuleId::Odds)
            .collect();
        let table = emit_table(&rows, Metric::Success, SequenceModel::Uniform01).unwrap();
        let lines: Vec<&str> = table.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].contains("| **<u>5</u>** |"));
    }

    #[test]
    fn incomplete_grid_is_report_error() {
        let mut rows = full_grid(SequenceModel::Uniform01);
        rows.retain(|s| !(s.rule == RuleId::TwoPhase && s.n == 200));
        assert_eq!(
            emit_table(&rows, Metric::Success, SequenceModel::Uniform01),
            Err(ReportError::MissingCell {
                rule: RuleId::TwoPhase,
                n: 200
            })
        );
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(parse_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad = format!("{}\nuniform,x,Exact,0,0,0,0,0,1,1\n", CSV_HEADER.join(","));
        assert!(parse_csv(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rate in 0.0f64..=1.0,
            stop in 1.0f64..1000.0,
            se in 0.0f64..1.0,
            forced in 0.0f64..=1.0,
            n in 2usize..5000,
            reps in 1u64..1_000_000,
            seed in any::<u64>(),
            rule_idx in 0usize..8,
            phi in -0.99f64..0.99,
        ) {
            let model = if rule_idx % 2 == 0 { SequenceModel::Ar1 { phi } } else { SequenceModel::ExponentialUnitRate };
            let s = RuleSummary {
                rule: RuleId::ALL[rule_idx], model, n,
                success_rate: rate, success_se: se, avg_stop: stop, stop_se: se / 3.0,
                forced_fraction: forced, reps, seed,
            };
            let parsed = parse_csv(csv_string(std::slice::from_ref(&s)).unwrap().as_bytes()).unwrap();
            prop_assert_eq!(parsed, vec![s]);
        }
    }
}
