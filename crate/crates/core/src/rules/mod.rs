//! Rank-based stopping rules as online state machines.
//!
//! Every rule consumes a stream of [`Observation`]s (position plus record
//! indicator) and answers [`Decision::Accept`] at most once. Rules never see
//! candidate values, so any strictly increasing transform of the values
//! leaves every decision unchanged.
//!
//! Stochastic rules (probabilistic early-accept, two-phase, and the ensemble
//! that contains them) draw their acceptance coins from a [`Coin`]. By
//! default that is the rule's own seeded ChaCha stream; the exact oracle
//! substitutes a scripted coin to integrate the randomness analytically.

mod adaptive;
mod cutoffs;
mod ensemble;
mod fixed;
mod stochastic;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub use adaptive::{AdaptiveRule, AdaptiveState};
pub use cutoffs::{
    ensemble_common_start, er_cutoff, exact_cutoff, harmonic, odds_cutoff, two_phase_accept_prob,
    CutoffSet,
};
pub use ensemble::{EnsembleRule, ENSEMBLE_SIZE};
pub use fixed::{CutoffRule, RollingDpRule};
pub use stochastic::{ProbabilisticRule, TwoPhaseRule};

use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("horizon n = {n} is too small (need n >= {min})")]
    HorizonTooSmall { n: usize, min: usize },
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("expected observation at t = {expected}, got t = {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("observation at t = {t} lies beyond horizon n = {n}")]
    BeyondHorizon { t: usize, n: usize },
    #[error("the first observation is always a record")]
    FirstNotRecord,
    #[error("rule already accepted at t = {0}")]
    AlreadyStopped(usize),
}

/// The eight rules, in the canonical catalog (table row) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    Exact,
    Odds,
    ExpectedRecord,
    Adaptive,
    Probabilistic,
    TwoPhase,
    RollingDp,
    Ensemble,
}

impl RuleId {
    pub const ALL: [RuleId; 8] = [
        RuleId::Exact,
        RuleId::Odds,
        RuleId::ExpectedRecord,
        RuleId::Adaptive,
        RuleId::Probabilistic,
        RuleId::TwoPhase,
        RuleId::RollingDp,
        RuleId::Ensemble,
    ];

    /// Members of the voting ensemble.
    pub const SUB_RULES: [RuleId; 7] = [
        RuleId::Exact,
        RuleId::Odds,
        RuleId::ExpectedRecord,
        RuleId::Adaptive,
        RuleId::Probabilistic,
        RuleId::TwoPhase,
        RuleId::RollingDp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RuleId::Exact => "Exact",
            RuleId::Odds => "Odds",
            RuleId::ExpectedRecord => "ER",
            RuleId::Adaptive => "AD",
            RuleId::Probabilistic => "PR",
            RuleId::TwoPhase => "TP",
            RuleId::RollingDp => "DP",
            RuleId::Ensemble => "VE",
        }
    }

    pub fn catalog_index(self) -> usize {
        self as usize
    }

    /// Whether the rule's decisions depend on acceptance coins.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            RuleId::Probabilistic | RuleId::TwoPhase | RuleId::Ensemble
        )
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RuleId {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rule = match s.trim().to_ascii_lowercase().as_str() {
            "exact" => RuleId::Exact,
            "odds" => RuleId::Odds,
            "er" | "expected-record" => RuleId::ExpectedRecord,
            "ad" | "adaptive" => RuleId::Adaptive,
            "pr" | "probabilistic" => RuleId::Probabilistic,
            "tp" | "two-phase" => RuleId::TwoPhase,
            "dp" | "rolling-dp" => RuleId::RollingDp,
            "ve" | "ensemble" | "voting" => RuleId::Ensemble,
            _ => return Err(RuleError::UnknownRule(s.to_string())),
        };
        Ok(rule)
    }
}

/// Tunable constants of the heuristic rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleParams {
    /// Adaptive adjustment strength.
    pub gamma: f64,
    /// Adaptive damping cap; the shift is clipped to `cap * sqrt(ln t)`.
    pub cap: f64,
    /// Early-accept ceiling of the probabilistic rule.
    pub eta: f64,
    /// Early-accept curvature of the probabilistic rule.
    pub p_exp: f64,
    /// Two-phase expansion factor.
    pub c_s: f64,
    /// Two-phase acceptance probability at the start of relaxation.
    pub q0: f64,
    /// Two-phase acceptance probability at the end of relaxation.
    pub q1: f64,
    /// Local-DP horizon.
    pub m0: usize,
    /// Ensemble size.
    pub k_rules: usize,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            gamma: 5.0,
            cap: 3.0,
            eta: 0.05,
            p_exp: 2.0,
            c_s: 0.4,
            q0: 0.02,
            q1: 0.30,
            m0: 12,
            k_rules: ENSEMBLE_SIZE,
        }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<(), RuleError> {
        fn bad(name: &'static str, value: f64, reason: &'static str) -> Result<(), RuleError> {
            Err(RuleError::InvalidParam {
                name,
                value,
                reason,
            })
        }
        // The oracle runs the probabilistic rule with eta = 0 to collapse it
        // onto a fixed cutoff, so the lower bound is inclusive here.
        if !(self.eta >= 0.0 && self.eta < 1.0) {
            return bad("eta", self.eta, "must lie in [0, 1)");
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad("gamma", self.gamma, "must be positive");
        }
        if !(self.cap > 0.0) || !self.cap.is_finite() {
            return bad("cap", self.cap, "must be positive");
        }
        if !(self.p_exp > 0.0) || !self.p_exp.is_finite() {
            return bad("p", self.p_exp, "must be positive");
        }
        if !(self.c_s > 0.0) || !self.c_s.is_finite() {
            return bad("c_s", self.c_s, "must be positive");
        }
        if !(0.0..=1.0).contains(&self.q0) {
            return bad("q0", self.q0, "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.q1) || self.q1 < self.q0 {
            return bad("q1", self.q1, "must lie in [q0, 1]");
        }
        if self.m0 < 1 {
            return bad("m0", self.m0 as f64, "must be at least 1");
        }
        if self.k_rules != ENSEMBLE_SIZE {
            return bad("k_rules", self.k_rules as f64, "the ensemble has exactly 7 members");
        }
        Ok(())
    }

    /// Votes needed for an ensemble majority, `ceil(K / 2)`.
    pub fn majority(&self) -> usize {
        self.k_rules.div_ceil(2)
    }
}

/// What a rule sees at time `t`: only whether the current candidate is a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub t: usize,
    pub is_record: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }

    fn from_bool(accept: bool) -> Self {
        if accept {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

/// Source of acceptance coin flips for the stochastic rules.
pub trait Coin {
    /// Returns `true` with probability `p`. Degenerate probabilities
    /// (`p <= 0`, `p >= 1`) must be answered without consuming randomness.
    fn flip(&mut self, p: f64) -> bool;
}

impl<R: Rng> Coin for R {
    fn flip(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.random::<f64>() < p
        }
    }
}

/// Position bookkeeping shared by every rule: enforces ordered observations
/// and the accept-at-most-once contract.
#[derive(Debug, Clone)]
pub(crate) struct Clock {
    n: usize,
    next: usize,
    stopped_at: Option<usize>,
}

impl Clock {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            next: 1,
            stopped_at: None,
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn check(&self, obs: Observation) -> Result<(), RuleError> {
        if let Some(t) = self.stopped_at {
            return Err(RuleError::AlreadyStopped(t));
        }
        if obs.t != self.next {
            return Err(RuleError::OutOfOrder {
                expected: self.next,
                got: obs.t,
            });
        }
        if obs.t > self.n {
            return Err(RuleError::BeyondHorizon { t: obs.t, n: self.n });
        }
        if obs.t == 1 && !obs.is_record {
            return Err(RuleError::FirstNotRecord);
        }
        Ok(())
    }

    pub(crate) fn commit(&mut self, t: usize, decision: Decision) -> Decision {
        self.next = t + 1;
        if decision.is_accept() {
            self.stopped_at = Some(t);
        }
        decision
    }

    pub(crate) fn stopped_at(&self) -> Option<usize> {
        self.stopped_at
    }
}

/// Online state of any rule in the catalog.
#[derive(Debug, Clone)]
pub enum RuleState {
    Cutoff(CutoffRule),
    Adaptive(AdaptiveRule),
    Probabilistic(ProbabilisticRule),
    TwoPhase(TwoPhaseRule),
    RollingDp(RollingDpRule),
    Ensemble(Box<EnsembleRule>),
}

/// Builds the initial state of `rule` for horizon `n`. The seed is only
/// consumed by stochastic rules.
pub fn rule_init(
    rule: RuleId,
    n: usize,
    params: &RuleParams,
    seed: u64,
) -> Result<RuleState, RuleError> {
    params.validate()?;
    let cutoffs = CutoffSet::new(n, params)?;
    Ok(RuleState::from_cutoffs(rule, &cutoffs, params, seed))
}

impl RuleState {
    pub(crate) fn from_cutoffs(
        rule: RuleId,
        cutoffs: &CutoffSet,
        params: &RuleParams,
        seed: u64,
    ) -> Self {
        match rule {
            RuleId::Exact | RuleId::Odds | RuleId::ExpectedRecord => {
                RuleState::Cutoff(CutoffRule::new(rule, cutoffs))
            }
            RuleId::Adaptive => RuleState::Adaptive(AdaptiveRule::new(cutoffs, params)),
            RuleId::Probabilistic => {
                RuleState::Probabilistic(ProbabilisticRule::new(cutoffs, params, seed))
            }
            RuleId::TwoPhase => RuleState::TwoPhase(TwoPhaseRule::new(cutoffs, params, seed)),
            RuleId::RollingDp => RuleState::RollingDp(RollingDpRule::new(cutoffs)),
            RuleId::Ensemble => {
                let subs = RuleId::SUB_RULES
                    .iter()
                    .map(|&sub| {
                        let sub_seed = derive_seed(seed, sub.catalog_index() as u64);
                        RuleState::from_cutoffs(sub, cutoffs, params, sub_seed)
                    })
                    .collect();
                RuleState::Ensemble(Box::new(EnsembleRule::new(subs, cutoffs, params)))
            }
        }
    }

    pub fn id(&self) -> RuleId {
        match self {
            RuleState::Cutoff(rule) => rule.id(),
            RuleState::Adaptive(_) => RuleId::Adaptive,
            RuleState::Probabilistic(_) => RuleId::Probabilistic,
            RuleState::TwoPhase(_) => RuleId::TwoPhase,
            RuleState::RollingDp(_) => RuleId::RollingDp,
            RuleState::Ensemble(_) => RuleId::Ensemble,
        }
    }

    pub fn n(&self) -> usize {
        self.clock().n()
    }

    /// Time of acceptance, if the rule has accepted.
    pub fn stopped_at(&self) -> Option<usize> {
        self.clock().stopped_at()
    }

    /// Consumes the next observation using the rule's own random stream.
    pub fn observe(&mut self, obs: Observation) -> Result<Decision, RuleError> {
        self.step(obs, None)
    }

    /// Consumes the next observation, drawing acceptance coins from `coin`.
    pub fn observe_with(
        &mut self,
        obs: Observation,
        coin: &mut dyn Coin,
    ) -> Result<Decision, RuleError> {
        self.step(obs, Some(coin))
    }

    pub(crate) fn step(
        &mut self,
        obs: Observation,
        coin: Option<&mut (dyn Coin + '_)>,
    ) -> Result<Decision, RuleError> {
        match self {
            RuleState::Cutoff(rule) => rule.observe(obs),
            RuleState::Adaptive(rule) => rule.observe(obs),
            RuleState::Probabilistic(rule) => rule.step(obs, coin),
            RuleState::TwoPhase(rule) => rule.step(obs, coin),
            RuleState::RollingDp(rule) => rule.observe(obs),
            RuleState::Ensemble(rule) => rule.step(obs, coin),
        }
    }

    fn clock(&self) -> &Clock {
        match self {
            RuleState::Cutoff(rule) => &rule.clock,
            RuleState::Adaptive(rule) => &rule.clock,
            RuleState::Probabilistic(rule) => &rule.clock,
            RuleState::TwoPhase(rule) => &rule.clock,
            RuleState::RollingDp(rule) => &rule.clock,
            RuleState::Ensemble(rule) => &rule.clock,
        }
    }
}
