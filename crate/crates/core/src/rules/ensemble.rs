use super::{Clock, Coin, CutoffSet, Decision, Observation, RuleError, RuleId, RuleParams, RuleState};

pub const ENSEMBLE_SIZE: usize = 7;

/// Majority vote over the seven member rules.
///
/// All members consume the same observations. A member votes at `t` iff it
/// accepts exactly at `t`; once it has accepted it never votes again. The
/// ensemble accepts at the first `t >= T_common` where at least
/// `ceil(K/2)` members vote. When fewer than that many members remain
/// undecided a majority can no longer form, and the ensemble falls back to
/// accepting the next record at or after `T_common`.
#[derive(Debug, Clone)]
pub struct EnsembleRule {
    subs: Vec<RuleState>,
    t_common: usize,
    majority: usize,
    votes_at_stop: Option<usize>,
    fallback_used: bool,
    pub(crate) clock: Clock,
}

impl EnsembleRule {
    pub(crate) fn new(subs: Vec<RuleState>, cutoffs: &CutoffSet, params: &RuleParams) -> Self {
        debug_assert_eq!(subs.len(), ENSEMBLE_SIZE);
        Self {
            subs,
            t_common: cutoffs.t_common(),
            majority: params.majority(),
            votes_at_stop: None,
            fallback_used: false,
            clock: Clock::new(cutoffs.n),
        }
    }

    pub fn t_common(&self) -> usize {
        self.t_common
    }

    pub fn members(&self) -> &[RuleState] {
        &self.subs
    }

    /// Realized stopping time of each member, in [`RuleId::SUB_RULES`] order.
    pub fn member_stop_times(&self) -> Vec<(RuleId, Option<usize>)> {
        self.subs.iter().map(|s| (s.id(), s.stopped_at())).collect()
    }

    /// Number of member votes at the ensemble's stopping time.
    pub fn votes_at_stop(&self) -> Option<usize> {
        self.votes_at_stop
    }

    /// Whether the ensemble stopped through the first-record fallback.
    pub fn fallback_used(&self) -> bool {
        self.fallback_used
    }

    pub(crate) fn step(
        &mut self,
        obs: Observation,
        mut coin: Option<&mut (dyn Coin + '_)>,
    ) -> Result<Decision, RuleError> {
        self.clock.check(obs)?;
        let mut votes = 0;
        let mut undecided = 0;
        for sub in self.subs.iter_mut().filter(|s| s.stopped_at().is_none()) {
            if sub.step(obs, coin.as_deref_mut())?.is_accept() {
                votes += 1;
            } else {
                undecided += 1;
            }
        }
        let open = obs.t >= self.t_common;
        let accept = if open && votes >= self.majority {
            true
        } else if open && obs.is_record && undecided < self.majority {
            self.fallback_used = true;
            true
        } else {
            false
        };
        if accept {
            self.votes_at_stop = Some(votes);
        }
        Ok(self.clock.commit(obs.t, Decision::from_bool(accept)))
    }
}
