//! Monte Carlo engine: shared trials, forced stopping, aggregation.

use rayon::prelude::*;
use thiserror::Error;

use crate::report::ReportError;
use crate::rules::{CutoffSet, RuleError, RuleId, RuleParams, RuleState};
use crate::seed::{derive_path, derive_seed};
use crate::seqgen::{generate, SeqError, SequenceModel, Trial};

pub const DEFAULT_N_LIST: [usize; 5] = [50, 100, 200, 500, 1000];
pub const DEFAULT_REPS: u64 = 10_000;
pub const DEFAULT_SEED: u64 = 20_251_016;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_list: Vec<usize>,
    pub reps: u64,
    pub models: Vec<SequenceModel>,
    pub rules: Vec<RuleId>,
    pub params: RuleParams,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_list: DEFAULT_N_LIST.to_vec(),
            reps: DEFAULT_REPS,
            models: SequenceModel::defaults(),
            rules: RuleId::ALL.to_vec(),
            params: RuleParams::default(),
            master_seed: DEFAULT_SEED,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.reps < 1 {
            return Err(HarnessError::InvalidConfig("reps must be at least 1".into()));
        }
        if self.n_list.is_empty() || self.models.is_empty() || self.rules.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "n list, models and rules must be non-empty".into(),
            ));
        }
        if let Some(n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(HarnessError::InvalidConfig(format!(
                "every n must be at least 2, got {n}"
            )));
        }
        for model in &self.models {
            model.validate()?;
        }
        self.params.validate()?;
        Ok(())
    }
}

/// Result of one rule on one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub rule: RuleId,
    /// Stopping time, 1-based.
    pub tau: usize,
    pub chosen_index: usize,
    pub success: bool,
    /// The rule never accepted and was stopped at `n`.
    pub forced: bool,
}

/// Aggregated metrics for one (model, n, rule) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSummary {
    pub rule: RuleId,
    pub model: SequenceModel,
    pub n: usize,
    pub success_rate: f64,
    pub success_se: f64,
    pub avg_stop: f64,
    pub stop_se: f64,
    pub forced_fraction: f64,
    pub reps: u64,
    pub seed: u64,
}

/// Seed of rule `rule`'s coin stream within a trial.
pub fn rule_seed(trial_seed: u64, rule: RuleId) -> u64 {
    derive_seed(trial_seed, 1 + rule.catalog_index() as u64)
}

/// Seed of replication `b` of the (model, n) cell.
pub fn replication_seed(master_seed: u64, model: SequenceModel, n: usize, b: u64) -> u64 {
    derive_path(master_seed, &[model.seed_tag(), n as u64, b])
}

/// The candidate sequence of a replication.
pub fn replication_trial(model: SequenceModel, n: usize, rep_seed: u64) -> Result<Trial, SeqError> {
    generate(model, n, derive_seed(rep_seed, 0))
}

/// Feeds the trial to `state` until it accepts; forces `tau = n` otherwise.
pub fn run_rule(mut state: RuleState, trial: &Trial) -> Result<TrialOutcome, RuleError> {
    let n = trial.n();
    let mut tau = None;
    for obs in trial.observations() {
        if state.observe(obs)?.is_accept() {
            tau = Some(obs.t);
            break;
        }
    }
    let forced = tau.is_none();
    let tau = tau.unwrap_or(n);
    Ok(TrialOutcome {
        rule: state.id(),
        tau,
        chosen_index: tau,
        success: tau == trial.argmax_index(),
        forced,
    })
}

/// Runs every rule on the same trial with independent coin streams.
pub fn run_trial(
    rules: &[RuleId],
    trial: &Trial,
    params: &RuleParams,
    trial_seed: u64,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    params.validate()?;
    let cutoffs = CutoffSet::new(trial.n(), params)?;
    run_trial_with(&cutoffs, rules, trial, params, trial_seed)
}

pub(crate) fn run_trial_with(
    cutoffs: &CutoffSet,
    rules: &[RuleId],
    trial: &Trial,
    params: &RuleParams,
    trial_seed: u64,
) -> Result<Vec<TrialOutcome>, HarnessError> {
    rules
        .iter()
        .map(|&rule| {
            let state =
                RuleState::from_cutoffs(rule, cutoffs, params, rule_seed(trial_seed, rule));
            Ok(run_rule(state, trial)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    count: u64,
    successes: u64,
    forced: u64,
    sum_tau: u64,
    sum_tau_sq: u128,
}

/// Exact integer accumulator for one (model, n) cell. Merging is
/// associative and commutative, so summaries do not depend on the order in
/// which replications are folded in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellAccumulator {
    rules: Vec<RuleId>,
    tallies: Vec<Tally>,
}

impl CellAccumulator {
    pub fn new(rules: &[RuleId]) -> Self {
        Self {
            rules: rules.to_vec(),
            tallies: vec![Tally::default(); rules.len()],
        }
    }

    /// Adds one replication; `outcomes` must follow the accumulator's rule order.
    pub fn push(&mut self, outcomes: &[TrialOutcome]) {
        debug_assert_eq!(outcomes.len(), self.rules.len());
        for (tally, outcome) in self.tallies.iter_mut().zip(outcomes) {
            let tau = outcome.tau as u64;
            tally.count += 1;
            tally.successes += outcome.success as u64;
            tally.forced += outcome.forced as u64;
            tally.sum_tau += tau;
            tally.sum_tau_sq += (tau as u128) * (tau as u128);
        }
    }

    pub fn merge(mut self, other: CellAccumulator) -> Self {
        for (a, b) in self.tallies.iter_mut().zip(other.tallies) {
            a.count += b.count;
            a.successes += b.successes;
            a.forced += b.forced;
            a.sum_tau += b.sum_tau;
            a.sum_tau_sq += b.sum_tau_sq;
        }
        self
    }

    pub fn summaries(&self, model: SequenceModel, n: usize, seed: u64) -> Vec<RuleSummary> {
        self.rules
            .iter()
            .zip(&self.tallies)
            .map(|(&rule, tally)| {
                let reps = tally.count;
                let b = reps as f64;
                let success_rate = tally.successes as f64 / b;
                let avg_stop = tally.sum_tau as f64 / b;
                let stop_se = if reps > 1 {
                    // B * sum(tau^2) - (sum tau)^2 is exact in integers.
                    let s = tally.sum_tau as u128;
                    let spread = reps as u128 * tally.sum_tau_sq - s * s;
                    let var = spread as f64 / (b * (b - 1.0));
                    (var / b).sqrt()
                } else {
                    0.0
                };
                RuleSummary {
                    rule,
                    model,
                    n,
                    success_rate,
                    success_se: (success_rate * (1.0 - success_rate) / b).sqrt(),
                    avg_stop,
                    stop_se,
                    forced_fraction: tally.forced as f64 / b,
                    reps,
                    seed,
                }
            })
            .collect()
    }
}

/// Runs the replications of a single (model, n) cell.
pub fn run_cell(
    config: &ExperimentConfig,
    model: SequenceModel,
    n: usize,
) -> Result<Vec<RuleSummary>, HarnessError> {
    let params = &config.params;
    let cutoffs = CutoffSet::new(n, params)?;
    let rules = &config.rules;
    let acc = (0..config.reps)
        .into_par_iter()
        .try_fold(
            || CellAccumulator::new(rules),
            |mut acc, b| -> Result<CellAccumulator, HarnessError> {
                let rep_seed = replication_seed(config.master_seed, model, n, b);
                let trial = replication_trial(model, n, rep_seed)?;
                let outcomes = run_trial_with(&cutoffs, rules, &trial, params, rep_seed)?;
                acc.push(&outcomes);
                Ok(acc)
            },
        )
        .try_reduce(|| CellAccumulator::new(rules), |a, b| Ok(a.merge(b)))?;
    Ok(acc.summaries(model, n, config.master_seed))
}

/// Runs the full grid, returning summaries sorted by (model, n, rule).
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RuleSummary>, HarnessError> {
    config.validate()?;
    let mut summaries = Vec::new();
    for &model in &config.models {
        for &n in &config.n_list {
            summaries.extend(run_cell(config, model, n)?);
        }
    }
    sort_summaries(&mut summaries);
    Ok(summaries)
}

pub fn sort_summaries(summaries: &mut [RuleSummary]) {
    summaries.sort_by(|a, b| {
        (a.model.sort_key(), a.n, a.rule.catalog_index()).cmp(&(
            b.model.sort_key(),
            b.n,
            b.rule.catalog_index(),
        ))
    });
}

/// Per-n success ranks and their sums for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub model: SequenceModel,
    pub n_values: Vec<usize>,
    pub rules: Vec<RuleId>,
    /// `ranks[i][j]`: rank of `rules[i]` at `n_values[j]` (1 = best, ties averaged).
    pub ranks: Vec<Vec<f64>>,
    pub rank_sums: Vec<f64>,
}

/// Average ranks of `scores`, highest score first.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| {
            let better = scores.iter().filter(|&&o| o > s).count();
            let tied = scores.iter().filter(|&&o| o == s).count();
            1.0 + better as f64 + (tied - 1) as f64 / 2.0
        })
        .collect()
}

/// Collects the (rule, n) success-rate grid of `model`.
pub(crate) fn grid<'a>(
    summaries: &'a [RuleSummary],
    model: SequenceModel,
) -> Result<(Vec<usize>, Vec<RuleId>, Vec<Vec<&'a RuleSummary>>), ReportError> {
    let cells: Vec<&RuleSummary> = summaries.iter().filter(|s| s.model == model).collect();
    if cells.is_empty() {
        return Err(ReportError::NoData(model.to_string()));
    }
    let mut n_values: Vec<usize> = cells.iter().map(|s| s.n).collect();
    n_values.sort_unstable();
    n_values.dedup();
    let mut rules: Vec<RuleId> = cells.iter().map(|s| s.rule).collect();
    rules.sort_unstable();
    rules.dedup();
    let rows = rules
        .iter()
        .map(|&rule| {
            n_values
                .iter()
                .map(|&n| {
                    cells
                        .iter()
                        .copied()
                        .find(|s| s.rule == rule && s.n == n)
                        .ok_or(ReportError::MissingCell { rule, n })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((n_values, rules, rows))
}

pub fn rank_table(summaries: &[RuleSummary], model: SequenceModel) -> Result<RankTable, ReportError> {
    let (n_values, rules, rows) = grid(summaries, model)?;
    let mut ranks = vec![vec![0.0; n_values.len()]; rules.len()];
    for j in 0..n_values.len() {
        let column: Vec<f64> = rows.iter().map(|row| row[j].success_rate).collect();
        for (i, r) in average_ranks(&column).into_iter().enumerate() {
            ranks[i][j] = r;
        }
    }
    let rank_sums = ranks.iter().map(|row| row.iter().sum()).collect();
    Ok(RankTable {
        model,
        n_values,
        rules,
        ranks,
        rank_sums,
    })
}
