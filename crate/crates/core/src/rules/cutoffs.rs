//! Closed-form cutoffs shared by the rules.

use std::f64::consts::E;

use super::{RuleError, RuleParams};

fn require_horizon(n: usize, min: usize) -> Result<(), RuleError> {
    if n < min {
        Err(RuleError::HorizonTooSmall { n, min })
    } else {
        Ok(())
    }
}

/// `H_n = 1 + 1/2 + ... + 1/n` by direct summation.
pub fn harmonic(n: usize) -> Result<f64, RuleError> {
    require_horizon(n, 1)?;
    Ok((1..=n).map(|k| 1.0 / k as f64).sum())
}

/// Optimal classical cutoff: the `r` in `1..n` maximizing
/// `P_r = (r/n) * sum_{k=r+1}^{n} 1/(k-1)`, together with the maximum.
/// Ties go to the smallest `r`.
pub fn exact_cutoff(n: usize) -> Result<(usize, f64), RuleError> {
    require_horizon(n, 2)?;
    let nf = n as f64;
    let mut tail = 0.0;
    let mut best = (n - 1, 0.0);
    // Walk r downward so the tail sum sum_{j=r}^{n-1} 1/j accumulates in
    // one pass; `>=` keeps the smallest maximizer.
    for r in (1..n).rev() {
        tail += 1.0 / r as f64;
        let p = r as f64 / nf * tail;
        if p >= best.1 {
            best = (r, p);
        }
    }
    Ok(best)
}

/// Odds-sum threshold for the classical record process (`o_i = 1/(i-1)`):
/// the largest `s` in `2..=n` whose tail odds sum reaches one.
pub fn odds_cutoff(n: usize) -> Result<usize, RuleError> {
    require_horizon(n, 2)?;
    let mut tail = 0.0;
    for s in (2..=n).rev() {
        tail += 1.0 / (s - 1) as f64;
        if tail >= 1.0 {
            return Ok(s);
        }
    }
    Ok(2)
}

/// Expected-record cutoff: the smallest `r` in `0..n` with `H_n - H_r <= 1`.
pub fn er_cutoff(n: usize) -> Result<usize, RuleError> {
    require_horizon(n, 2)?;
    // H_n - H_r = sum_{k=r+1}^{n} 1/k grows as r decreases; find the
    // last r (walking down) where it is still <= 1.
    let mut tail = 0.0;
    let mut r = n;
    while r > 0 {
        let next = tail + 1.0 / r as f64;
        if next > 1.0 {
            break;
        }
        tail = next;
        r -= 1;
    }
    Ok(r.min(n - 1))
}

/// Two-phase acceptance probability: zero through `r1`, linear from `q0`
/// to `q1` on `(r1, r2]`, one afterwards.
pub fn two_phase_accept_prob(t: usize, r1: usize, r2: usize, params: &RuleParams) -> f64 {
    if t <= r1 {
        0.0
    } else if t <= r2 {
        let span = r2.saturating_sub(r1).max(1) as f64;
        params.q0 + (params.q1 - params.q0) * (t - r1) as f64 / span
    } else {
        1.0
    }
}

/// Latest start time among the ensemble members.
pub fn ensemble_common_start(n: usize, params: &RuleParams) -> Result<usize, RuleError> {
    Ok(CutoffSet::new(n, params)?.t_common())
}

/// Every precomputed cutoff the rules need for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSet {
    pub n: usize,
    /// Optimal classical cutoff.
    pub r_star: usize,
    /// Success probability of the optimal cutoff.
    pub p_star: f64,
    /// Odds-sum threshold (first position at which records are accepted).
    pub s_star: usize,
    /// Expected-record cutoff.
    pub r_er: usize,
    /// `floor(n / e)`; anchor of the adaptive rule and the probabilistic switch time.
    pub r0: usize,
    /// End of the two-phase exploration phase.
    pub r1: usize,
    /// End of the two-phase relaxation phase.
    pub r2: usize,
    /// `r_star_table[m]` is the optimal cutoff for horizon `m`, for `m` in
    /// `1..=m0`. Index 0 is unused; horizon 1 has cutoff 0.
    pub r_star_table: Vec<usize>,
}

impl CutoffSet {
    pub fn new(n: usize, params: &RuleParams) -> Result<Self, RuleError> {
        require_horizon(n, 2)?;
        let (r_star, p_star) = exact_cutoff(n)?;
        let s_star = odds_cutoff(n)?;
        let r_er = er_cutoff(n)?;
        let r0 = (n as f64 / E).floor() as usize;
        let r1 = 9 * r_star / 10;
        let expansion = (params.c_s * (n as f64).sqrt()).floor() as usize;
        let r2 = (r_star + expansion).min(n - 1);
        let mut r_star_table = vec![0; params.m0 + 1];
        for (m, slot) in r_star_table.iter_mut().enumerate().skip(2) {
            *slot = exact_cutoff(m)?.0;
        }
        Ok(Self {
            n,
            r_star,
            p_star,
            s_star,
            r_er,
            r0,
            r1,
            r2,
            r_star_table,
        })
    }

    /// Per-member start times in [`super::RuleId::SUB_RULES`] order.
    pub fn start_times(&self) -> [usize; 7] {
        [
            self.r_star + 1,
            self.s_star,
            self.r_er + 1,
            self.r0,
            1,
            self.r1 + 1,
            self.s_star,
        ]
    }

    pub fn t_common(&self) -> usize {
        self.start_times().into_iter().max().unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    /// Exact evaluation of the classical cutoff success probability.
    fn success_ratio(n: u64, r: u64) -> Ratio<u64> {
        let tail = (r..n).fold(Ratio::from_integer(0), |acc, j| acc + Ratio::new(1, j));
        Ratio::new(r, n) * tail
    }

    /// Brute force over all n! orderings for the classical cutoff rule.
    fn brute_force_cutoff(n: usize, r: usize) -> Ratio<u64> {
        use itertools::Itertools;
        let mut wins = 0u64;
        let mut total = 0u64;
        for perm in (0..n).permutations(n) {
            total += 1;
            let best_seen = perm[..r].iter().copied().max().unwrap_or(0);
            let chosen = perm[r..]
                .iter()
                .position(|&v| v > best_seen)
                .map(|i| perm[r + i])
                .unwrap_or(perm[n - 1]);
            if chosen == n - 1 {
                wins += 1;
            }
        }
        Ratio::new(wins, total)
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1).unwrap(), 1.0);
        assert!((harmonic(4).unwrap() - 25.0 / 12.0).abs() < 1e-15);
        // Frozen from exact rational summation.
        assert!((harmonic(100).unwrap() - 5.187_377_517_639_621).abs() < 1e-12);
        assert!(matches!(
            harmonic(0),
            Err(RuleError::HorizonTooSmall { n: 0, min: 1 })
        ));
    }

    #[test]
    fn exact_cutoff_small_horizons_match_brute_force() {
        assert_eq!(brute_force_cutoff(3, 1), Ratio::new(1, 2));
        assert_eq!(brute_force_cutoff(4, 1), Ratio::new(11, 24));

        let (r, p) = exact_cutoff(3).unwrap();
        assert_eq!(r, 1);
        assert!((p - 0.5).abs() < 1e-15);
        let (r, p) = exact_cutoff(4).unwrap();
        assert_eq!(r, 1);
        assert!((p - 11.0 / 24.0).abs() < 1e-15);
        assert!(exact_cutoff(1).is_err());
    }

    #[test]
    fn exact_cutoff_matches_rational_argmax() {
        for n in 2..=40u64 {
            let best = (1..n)
                .map(|r| (r, success_ratio(n, r)))
                .fold((0, Ratio::from_integer(0)), |acc, (r, p)| {
                    if p > acc.1 {
                        (r, p)
                    } else {
                        acc
                    }
                });
            let (r, p) = exact_cutoff(n as usize).unwrap();
            assert_eq!(r as u64, best.0, "n = {n}");
            let exact = *best.1.numer() as f64 / *best.1.denom() as f64;
            assert!((p - exact).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn exact_cutoff_ratio_tends_to_inverse_e() {
        let (r, _) = exact_cutoff(100_000).unwrap();
        assert!((r as f64 / 100_000.0 - 0.3679).abs() < 1e-3);
    }

    #[test]
    fn exact_cutoff_monotone_and_in_band() {
        let mut prev = 0;
        for n in 2..=200 {
            let (r, _) = exact_cutoff(n).unwrap();
            assert!(r >= prev, "n = {n}");
            prev = r;
            if n >= 10 {
                let ratio = r as f64 / n as f64;
                assert!((0.30..=0.45).contains(&ratio), "n = {n}: {ratio}");
            }
        }
    }

    #[test]
    fn exact_cutoff_is_locally_optimal() {
        let eval = |n: usize, r: usize| -> f64 {
            r as f64 / n as f64 * (r + 1..=n).map(|k| 1.0 / (k - 1) as f64).sum::<f64>()
        };
        for n in 3..=1000 {
            let (r, p) = exact_cutoff(n).unwrap();
            if r > 1 {
                assert!(p >= eval(n, r - 1) - 1e-12, "n = {n}");
            }
            if r + 1 < n {
                assert!(p >= eval(n, r + 1) - 1e-12, "n = {n}");
            }
        }
    }

    #[test]
    fn odds_cutoff_values() {
        assert_eq!(odds_cutoff(2).unwrap(), 2);
        assert_eq!(odds_cutoff(4).unwrap(), 2);
        let s = odds_cutoff(100).unwrap();
        let reference = (100.0 / E).floor() as usize + 1;
        assert!(s.abs_diff(reference) <= 2, "s* = {s}");
        // Frozen from exact rational tail sums.
        assert_eq!(s, 38);
        assert!(odds_cutoff(1).is_err());
    }

    #[test]
    fn er_cutoff_values() {
        assert_eq!(er_cutoff(2).unwrap(), 1);
        assert_eq!(er_cutoff(10).unwrap(), 4);
        // H_100 - H_36 = 1.0128 > 1, H_100 - H_37 = 0.9858 <= 1.
        assert_eq!(er_cutoff(100).unwrap(), 37);
        assert!(er_cutoff(0).is_err());
    }

    #[test]
    fn two_phase_prob_boundaries() {
        let params = RuleParams::default();
        let (r1, r2) = (33, 41);
        assert_eq!(two_phase_accept_prob(r1, r1, r2, &params), 0.0);
        assert!((two_phase_accept_prob(r2, r1, r2, &params) - 0.30).abs() < 1e-15);
        assert_eq!(two_phase_accept_prob(r2 + 1, r1, r2, &params), 1.0);
        assert!((two_phase_accept_prob(r1 + 1, r1, r2, &params) - (0.02 + 0.28 / 8.0)).abs() < 1e-15);
        // Degenerate span uses a denominator of one.
        assert!((two_phase_accept_prob(5, 4, 4, &params) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cutoff_set_for_hundred() {
        let set = CutoffSet::new(100, &RuleParams::default()).unwrap();
        assert_eq!(set.r_star, 37);
        assert_eq!(set.r0, 36);
        assert_eq!(set.r1, 33);
        assert_eq!(set.r2, 41);
        assert_eq!(set.s_star, 38);
        assert_eq!(set.r_er, 37);
        assert_eq!(set.r_star_table.len(), 13);
        assert_eq!(set.r_star_table[1], 0);
        for m in 2..=12 {
            assert_eq!(set.r_star_table[m], exact_cutoff(m).unwrap().0);
        }
    }

    #[test]
    fn common_start_values() {
        let params = RuleParams::default();
        assert_eq!(ensemble_common_start(2, &params).unwrap(), 2);
        let set = CutoffSet::new(100, &params).unwrap();
        let expected = [set.r_star + 1, set.s_star, set.r_er + 1, 36, 1, set.r1 + 1]
            .into_iter()
            .max()
            .unwrap();
        assert_eq!(ensemble_common_start(100, &params).unwrap(), expected);
        for n in 3..=300 {
            assert!(ensemble_common_start(n, &params).unwrap() <= n - 1, "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn cutoff_set_invariants(n in 3usize..2000) {
            let set = CutoffSet::new(n, &RuleParams::default()).unwrap();
            prop_assert!(set.r1 <= set.r_star);
            prop_assert!(set.r_star <= set.r2);
            prop_assert!(set.r2 <= n - 1);
            prop_assert!(set.s_star >= 2 && set.s_star <= n);
            prop_assert!(set.r_er <= n - 1);
            let gap = (set.r_er + 1..=n).map(|k| 1.0 / k as f64).sum::<f64>();
            prop_assert!(gap <= 1.0 + 1e-12);
        }
    }
}
