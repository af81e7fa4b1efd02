//! Exact ground truth for small horizons.
//!
//! [`enumerate_success`] walks every ordering of `n` distinct ranks. For
//! rules without acceptance coins the result is an exact rational with
//! denominator `n!`. For stochastic rules each ordering is expanded into the
//! tree of coin outcomes the rule actually requests, weighted by their
//! probabilities, so the result carries no sampling noise.

use itertools::Itertools;
use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::rules::{Coin, CutoffSet, RuleError, RuleId, RuleParams, RuleState};
use crate::seqgen::{SeqError, Trial};

/// Largest horizon the enumeration accepts (10! orderings).
pub const MAX_ENUMERATION_N: usize = 10;
/// Largest horizon for exact rational evaluation of the cutoff formula.
pub const MAX_EXACT_ANALYTIC_N: usize = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("enumeration refused for n = {0} (need 2 <= n <= {MAX_ENUMERATION_N})")]
    HorizonOutOfRange(usize),
    #[error("cutoff r = {r} out of range 1..={max}")]
    CutoffOutOfRange { r: usize, max: usize },
    #[error("exact rational evaluation limited to n <= {MAX_EXACT_ANALYTIC_N}, got {0}")]
    TooLargeForRational(usize),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
}

/// Exact rational for coin-free rules, otherwise a probability-weighted real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactValue {
    Rational(Ratio<u64>),
    Real(f64),
}

impl ExactValue {
    pub fn to_f64(self) -> f64 {
        match self {
            ExactValue::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            ExactValue::Real(x) => x,
        }
    }

    pub fn as_rational(self) -> Option<Ratio<u64>> {
        match self {
            ExactValue::Rational(r) => Some(r),
            ExactValue::Real(_) => None,
        }
    }
}

impl std::fmt::Display for ExactValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExactValue::Rational(r) => write!(f, "{r}"),
            ExactValue::Real(x) => write!(f, "{x:.12}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub n: usize,
    pub rule: RuleId,
    pub success_probability: ExactValue,
    pub expected_stop: ExactValue,
}

/// `P_r = (r/n) * sum_{k=r+1}^{n} 1/(k-1)`.
pub fn analytic_success(n: usize, r: usize) -> Result<f64, OracleError> {
    check_cutoff(n, r)?;
    let tail: f64 = (r + 1..=n).map(|k| 1.0 / (k - 1) as f64).sum();
    Ok(r as f64 / n as f64 * tail)
}

/// [`analytic_success`] in exact rational arithmetic.
pub fn analytic_success_exact(n: usize, r: usize) -> Result<Ratio<u64>, OracleError> {
    check_cutoff(n, r)?;
    if n > MAX_EXACT_ANALYTIC_N {
        return Err(OracleError::TooLargeForRational(n));
    }
    let tail = (r + 1..=n).fold(Ratio::from_integer(0u64), |acc, k| {
        acc + Ratio::new(1, (k - 1) as u64)
    });
    Ok(Ratio::new(r as u64, n as u64) * tail)
}

fn check_cutoff(n: usize, r: usize) -> Result<(), OracleError> {
    if n < 2 || r < 1 || r > n - 1 {
        return Err(OracleError::CutoffOutOfRange {
            r,
            max: n.saturating_sub(1),
        });
    }
    Ok(())
}

/// Replays a fixed prefix of coin outcomes, answering `false` past it, and
/// records every non-degenerate flip with its probability weight.
struct ScriptedCoin<'a> {
    script: &'a [bool],
    path: Vec<bool>,
    weight: f64,
}

impl Coin for ScriptedCoin<'_> {
    fn flip(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        let outcome = self.script.get(self.path.len()).copied().unwrap_or(false);
        self.path.push(outcome);
        self.weight *= if outcome { p } else { 1.0 - p };
        outcome
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Partial {
    /// Orderings resolved without any coin.
    wins: u64,
    tau_sum: u64,
    /// Probability mass from orderings that needed coins.
    weighted_wins: f64,
    weighted_tau: f64,
    branched: bool,
}

impl Partial {
    fn add(mut self, other: Partial) -> Partial {
        self.wins += other.wins;
        self.tau_sum += other.tau_sum;
        self.weighted_wins += other.weighted_wins;
        self.weighted_tau += other.weighted_tau;
        self.branched |= other.branched;
        self
    }
}

fn stop_time(state: &mut RuleState, trial: &Trial, coin: &mut dyn Coin) -> Result<usize, RuleError> {
    for obs in trial.observations() {
        if state.observe_with(obs, coin)?.is_accept() {
            return Ok(obs.t);
        }
    }
    Ok(trial.n())
}

/// Integrates the coin tree of one ordering.
fn integrate(proto: &RuleState, trial: &Trial) -> Result<Partial, RuleError> {
    let target = trial.argmax_index();
    let mut out = Partial::default();
    let mut script: Vec<bool> = Vec::new();
    loop {
        let mut coin = ScriptedCoin {
            script: &script,
            path: Vec::new(),
            weight: 1.0,
        };
        let tau = stop_time(&mut proto.clone(), trial, &mut coin)?;
        let ScriptedCoin { path, weight, .. } = coin;
        if path.is_empty() {
            // No coin consulted: this ordering has a single outcome.
            out.wins += (tau == target) as u64;
            out.tau_sum += tau as u64;
            return Ok(out);
        }
        out.branched = true;
        if tau == target {
            out.weighted_wins += weight;
        }
        out.weighted_tau += weight * tau as f64;
        // Next path in depth-first order: flip the deepest `false` to `true`.
        script = path;
        loop {
            match script.pop() {
                Some(false) => {
                    script.push(true);
                    break;
                }
                Some(true) => continue,
                None => return Ok(out),
            }
        }
    }
}

/// Exact success probability and expected stopping time of `rule` over all
/// `n!` equally likely rank orderings.
pub fn enumerate_success(
    rule: RuleId,
    n: usize,
    params: &RuleParams,
) -> Result<ExactResult, OracleError> {
    if !(2..=MAX_ENUMERATION_N).contains(&n) {
        return Err(OracleError::HorizonOutOfRange(n));
    }
    params.validate()?;
    let cutoffs = CutoffSet::new(n, params)?;
    let proto = RuleState::from_cutoffs(rule, &cutoffs, params, 0);

    // Partition on the first rank; partial sums are combined in a fixed order.
    let partials: Vec<Partial> = (0..n)
        .into_par_iter()
        .map(|first| -> Result<Partial, OracleError> {
            let rest: Vec<usize> = (0..n).filter(|&v| v != first).collect();
            let mut acc = Partial::default();
            for tail in rest.into_iter().permutations(n - 1) {
                let values = std::iter::once(first)
                    .chain(tail)
                    .map(|v| v as f64)
                    .collect();
                let trial = Trial::from_values(values)?;
                acc = acc.add(integrate(&proto, &trial)?);
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;
    let total = partials.into_iter().fold(Partial::default(), Partial::add);

    let orderings: u64 = (1..=n as u64).product();
    let (success_probability, expected_stop) = if total.branched {
        let denom = orderings as f64;
        (
            ExactValue::Real((total.wins as f64 + total.weighted_wins) / denom),
            ExactValue::Real((total.tau_sum as f64 + total.weighted_tau) / denom),
        )
    } else {
        (
            ExactValue::Rational(Ratio::new(total.wins, orderings)),
            ExactValue::Rational(Ratio::new(total.tau_sum, orderings)),
        )
    };
    Ok(ExactResult {
        n,
        rule,
        success_probability,
        expected_stop,
    })
}
