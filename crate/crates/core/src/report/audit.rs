use std::fmt::Write as _;

use thiserror::Error;

use crate::harness::{run_cell, ExperimentConfig, HarnessError};
use crate::oracle::{enumerate_success, ExactValue, OracleError, MAX_ENUMERATION_N};
use crate::rules::{RuleId, RuleParams};
use crate::seqgen::SequenceModel;

/// An audit fails when any |z| exceeds this.
pub const AUDIT_Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditLine {
    pub n: usize,
    pub rule: RuleId,
    pub exact: ExactValue,
    pub monte_carlo: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub reps: u64,
    pub seed: u64,
    pub lines: Vec<AuditLine>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.z.abs() <= AUDIT_Z_LIMIT)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.lines.iter().map(|l| l.z.abs()).fold(0.0, f64::max)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "oracle audit: uniform ranks, {} replications, seed {}",
            self.reps, self.seed
        );
        let _ = writeln!(out, "{:>3} {:>6} {:>22} {:>10} {:>8}", "n", "rule", "exact", "mc", "z");
        for l in &self.lines {
            let exact = match l.exact {
                ExactValue::Rational(r) => format!("{r} ({:.6})", l.exact.to_f64()),
                ExactValue::Real(x) => format!("{x:.6}"),
            };
            let _ = writeln!(
                out,
                "{:>3} {:>6} {:>22} {:>10.6} {:>8.3}",
                l.n,
                l.rule.label(),
                exact,
                l.monte_carlo,
                l.z
            );
        }
        let _ = writeln!(
            out,
            "max |z| = {:.3} ({})",
            self.max_abs_z(),
            if self.passed() { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// z-score of a Monte Carlo proportion against its exact value.
pub(crate) fn z_score(estimate: f64, exact: f64, reps: u64) -> f64 {
    let se = (exact * (1.0 - exact) / reps as f64).sqrt();
    if se > 0.0 {
        (estimate - exact) / se
    } else if estimate == exact {
        0.0
    } else {
        f64::INFINITY
    }
}

/// For every `n` in `2..=n_max` and every rule, compares the enumerated
/// success probability with a Monte Carlo estimate on uniform values.
pub fn oracle_audit(
    n_max: usize,
    rules: &[RuleId],
    params: &RuleParams,
    reps: u64,
    seed: u64,
) -> Result<AuditReport, AuditError> {
    if !(2..=MAX_ENUMERATION_N).contains(&n_max) {
        return Err(AuditError::Usage(format!(
            "n_max must lie in 2..={MAX_ENUMERATION_N}, got {n_max}"
        )));
    }
    if rules.is_empty() {
        return Err(AuditError::Usage("rule list is empty".into()));
    }
    let mut lines = Vec::new();
    for n in 2..=n_max {
        let config = ExperimentConfig {
            n_list: vec![n],
            reps,
            models: vec![SequenceModel::Uniform01],
            rules: rules.to_vec(),
            params: *params,
            master_seed: seed,
        };
        config.validate()?;
        let summaries = run_cell(&config, SequenceModel::Uniform01, n)?;
        for (&rule, summary) in rules.iter().zip(&summaries) {
            let exact = enumerate_success(rule, n, params)?.success_probability;
            lines.push(AuditLine {
                n,
                rule,
                exact,
                monte_carlo: summary.success_rate,
                z: z_score(summary.success_rate, exact.to_f64(), reps),
            });
        }
    }
    Ok(AuditReport { reps, seed, lines })
}
