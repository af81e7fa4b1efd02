//! Rank-based stopping rules for the best-choice secretary problem.
//!
//! - [`rules`]: closed-form cutoffs and eight online stopping rules
//!   (exact optimal, odds-sum, expected-record, adaptive, probabilistic
//!   early-accept, two-phase, rolling local-DP, and a voting ensemble).
//! - [`seqgen`]: seeded candidate sequences (uniform, normal, exponential,
//!   stationary AR(1)) and their record-indicator view.
//! - [`harness`]: Monte Carlo runner with forced stopping and exact,
//!   order-independent aggregation.
//! - [`oracle`]: exhaustive enumeration over rank orderings for small `n`.
//! - [`report`]: CSV and markdown table output, CLI configuration, audits.

pub mod harness;
pub mod oracle;
pub mod report;
pub mod rules;
pub mod seed;
pub mod seqgen;

pub use harness::{
    rank_table, run_experiment, run_trial, ExperimentConfig, RankTable, RuleSummary, TrialOutcome,
};
pub use oracle::{analytic_success, enumerate_success, ExactResult, ExactValue};
pub use rules::{rule_init, Decision, Observation, RuleId, RuleParams, RuleState};
pub use seqgen::{generate, to_observations, SequenceModel, Trial};
