use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    two_phase_accept_prob, Clock, Coin, CutoffSet, Decision, Observation, RuleError, RuleParams,
};

/// Degenerate probabilities are resolved without consulting any coin.
fn draw(q: f64, coin: Option<&mut (dyn Coin + '_)>, rng: &mut ChaCha8Rng) -> bool {
    if q <= 0.0 {
        false
    } else if q >= 1.0 {
        true
    } else {
        match coin {
            Some(coin) => coin.flip(q),
            None => rng.flip(q),
        }
    }
}

/// Records before `tau0 = floor(n/e)` are accepted with probability
/// `eta * (t / tau0)^p`; from `tau0` on, the first record is taken.
#[derive(Debug, Clone)]
pub struct ProbabilisticRule {
    tau0: usize,
    eta: f64,
    p_exp: f64,
    rng: ChaCha8Rng,
    pub(crate) clock: Clock,
}

impl ProbabilisticRule {
    pub(crate) fn new(cutoffs: &CutoffSet, params: &RuleParams, seed: u64) -> Self {
        Self {
            tau0: cutoffs.r0,
            eta: params.eta,
            p_exp: params.p_exp,
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: Clock::new(cutoffs.n),
        }
    }

    pub fn tau0(&self) -> usize {
        self.tau0
    }

    /// Probability of accepting a record at `t`.
    pub fn accept_probability(&self, t: usize) -> f64 {
        if t >= self.tau0 {
            1.0
        } else {
            self.eta * (t as f64 / self.tau0 as f64).powf(self.p_exp)
        }
    }

    pub(crate) fn step(
        &mut self,
        obs: Observation,
        coin: Option<&mut (dyn Coin + '_)>,
    ) -> Result<Decision, RuleError> {
        self.clock.check(obs)?;
        let accept = obs.is_record && {
            let q = self.accept_probability(obs.t);
            draw(q, coin, &mut self.rng)
        };
        Ok(self.clock.commit(obs.t, Decision::from_bool(accept)))
    }
}

/// Exploration through `r1`, probabilistic relaxation on `(r1, r2]`,
/// deterministic first-record acceptance after `r2`.
#[derive(Debug, Clone)]
pub struct TwoPhaseRule {
    r1: usize,
    r2: usize,
    params: RuleParams,
    rng: ChaCha8Rng,
    pub(crate) clock: Clock,
}

impl TwoPhaseRule {
    pub(crate) fn new(cutoffs: &CutoffSet, params: &RuleParams, seed: u64) -> Self {
        Self {
            r1: cutoffs.r1,
            r2: cutoffs.r2,
            params: *params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: Clock::new(cutoffs.n),
        }
    }

    pub fn r1(&self) -> usize {
        self.r1
    }

    pub fn r2(&self) -> usize {
        self.r2
    }

    pub fn accept_probability(&self, t: usize) -> f64 {
        two_phase_accept_prob(t, self.r1, self.r2, &self.params)
    }

    pub(crate) fn step(
        &mut self,
        obs: Observation,
        coin: Option<&mut (dyn Coin + '_)>,
    ) -> Result<Decision, RuleError> {
        self.clock.check(obs)?;
        let accept = obs.is_record && {
            let q = self.accept_probability(obs.t);
            draw(q, coin, &mut self.rng)
        };
        Ok(self.clock.commit(obs.t, Decision::from_bool(accept)))
    }
}
