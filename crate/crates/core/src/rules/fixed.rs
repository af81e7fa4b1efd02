use super::{Clock, CutoffSet, Decision, Observation, RuleError, RuleId};

/// Skip a fixed prefix, then accept the first record. Covers the exact
/// optimal, odds-sum and expected-record rules.
#[derive(Debug, Clone)]
pub struct CutoffRule {
    id: RuleId,
    /// First position at which a record is accepted.
    threshold: usize,
    pub(crate) clock: Clock,
}

impl CutoffRule {
    pub(crate) fn new(id: RuleId, cutoffs: &CutoffSet) -> Self {
        let threshold = match id {
            RuleId::Exact => cutoffs.r_star + 1,
            RuleId::Odds => cutoffs.s_star,
            RuleId::ExpectedRecord => cutoffs.r_er + 1,
            other => unreachable!("{other} is not a fixed-cutoff rule"),
        };
        Self {
            id,
            threshold,
            clock: Clock::new(cutoffs.n),
        }
    }

    pub fn id(&self) -> RuleId {
        self.id
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn observe(&mut self, obs: Observation) -> Result<Decision, RuleError> {
        self.clock.check(obs)?;
        let accept = obs.is_record && obs.t >= self.threshold;
        Ok(self.clock.commit(obs.t, Decision::from_bool(accept)))
    }
}

/// Odds-sum rule while more than `m0` candidates remain; inside the final
/// window, the exact cutoff for the current remaining length `m` applied to
/// the position within the window.
#[derive(Debug, Clone)]
pub struct RollingDpRule {
    s_star: usize,
    r_star_table: Vec<usize>,
    /// First position of the local window (first `t` with `m <= m0`).
    window_start: usize,
    pub(crate) clock: Clock,
}

impl RollingDpRule {
    pub(crate) fn new(cutoffs: &CutoffSet) -> Self {
        let m0 = cutoffs.r_star_table.len() - 1;
        let n = cutoffs.n;
        Self {
            s_star: cutoffs.s_star,
            r_star_table: cutoffs.r_star_table.clone(),
            window_start: n.saturating_sub(m0) + 1,
            clock: Clock::new(n),
        }
    }

    pub fn m0(&self) -> usize {
        self.r_star_table.len() - 1
    }

    pub fn window_start(&self) -> usize {
        self.window_start
    }

    pub fn observe(&mut self, obs: Observation) -> Result<Decision, RuleError> {
        self.clock.check(obs)?;
        let remaining = self.clock.n() - obs.t + 1;
        let accept = obs.is_record
            && if remaining > self.m0() {
                obs.t >= self.s_star
            } else {
                let t_local = obs.t - self.window_start + 1;
                t_local > self.r_star_table[remaining]
            };
        Ok(self.clock.commit(obs.t, Decision::from_bool(accept)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleParams;

    fn run(rule: &mut RollingDpRule, records: &[bool]) -> Option<usize> {
        for (i, &is_record) in records.iter().enumerate() {
            let obs = Observation { t: i + 1, is_record };
            if rule.observe(obs).unwrap().is_accept() {
                return Some(obs.t);
            }
        }
        None
    }

    #[test]
    fn thresholds_follow_cutoffs() {
        let set = CutoffSet::new(100, &RuleParams::default()).unwrap();
        assert_eq!(CutoffRule::new(RuleId::Exact, &set).threshold(), 38);
        assert_eq!(CutoffRule::new(RuleId::Odds, &set).threshold(), 38);
        assert_eq!(CutoffRule::new(RuleId::ExpectedRecord, &set).threshold(), 38);
    }

    #[test]
    fn rolling_dp_uses_odds_rule_before_window() {
        let set = CutoffSet::new(100, &RuleParams::default()).unwrap();
        let mut rule = RollingDpRule::new(&set);
        assert_eq!(rule.window_start(), 89);
        let mut records = vec![false; 100];
        records[0] = true;
        records[37] = true; // t = 38 = s*
        assert_eq!(run(&mut rule, &records), Some(38));

        let mut rule = RollingDpRule::new(&set);
        records[37] = false;
        records[36] = true; // t = 37 < s*
        assert_eq!(run(&mut rule, &records), None);
    }

    #[test]
    fn rolling_dp_window_uses_current_remaining_length() {
        let set = CutoffSet::new(100, &RuleParams::default()).unwrap();
        // t = 89: m = 12, t_local = 1, r*(12) = 4 -> reject.
        // t = 93: m = 8, t_local = 5, r*(8) = 3 -> accept.
        let mut records = vec![false; 100];
        records[0] = true;
        records[88] = true;
        records[92] = true;
        let mut rule = RollingDpRule::new(&set);
        assert_eq!(run(&mut rule, &records), Some(93));

        // t = 92: m = 9, t_local = 4, r*(9) = 3 -> accept.
        let mut records = vec![false; 100];
        records[0] = true;
        records[91] = true;
        let mut rule = RollingDpRule::new(&set);
        assert_eq!(run(&mut rule, &records), Some(92));

        // t = 91: m = 10, t_local = 3, r*(10) = 3 -> reject.
        let mut records = vec![false; 100];
        records[0] = true;
        records[90] = true;
        let mut rule = RollingDpRule::new(&set);
        assert_eq!(run(&mut rule, &records), None);
    }

    #[test]
    fn rolling_dp_short_horizon_window_starts_at_one() {
        // n <= m0: the whole sequence is the local window.
        let set = CutoffSet::new(4, &RuleParams::default()).unwrap();
        let mut rule = RollingDpRule::new(&set);
        assert_eq!(rule.window_start(), 1);
        // t = 2: m = 3, r*(3) = 1, t_local = 2 > 1 -> accept.
        assert_eq!(run(&mut rule, &[true, true, false, false]), Some(2));
    }

    #[test]
    fn rolling_dp_accepts_last_record() {
        // m = 1 has cutoff 0, so a record at t = n is taken.
        let set = CutoffSet::new(100, &RuleParams::default()).unwrap();
        let mut records = vec![false; 100];
        records[0] = true;
        records[99] = true;
        let mut rule = RollingDpRule::new(&set);
        assert_eq!(run(&mut rule, &records), Some(100));
    }
}
