use super::{Clock, CutoffSet, Decision, Observation, RuleError, RuleParams};

/// Streaming deviation-corrected cutoff.
///
/// After observing position `t` the cutoff is
/// `s_t = clamp(round(r0 - clip(gamma * (R_t - H_t), cap * sqrt(ln t))), 1, n - 1)`
/// where `R_t` counts records among the first `t` positions and `H_t` is the
/// expected count. More records than expected pull the cutoff earlier.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    n: usize,
    r0: usize,
    gamma: f64,
    cap: f64,
    t: usize,
    records_seen: usize,
    harmonic_t: f64,
    s_t: usize,
}

impl AdaptiveState {
    pub fn new(n: usize, r0: usize, params: &RuleParams) -> Self {
        Self {
            n,
            r0,
            gamma: params.gamma,
            cap: params.cap,
            t: 0,
            records_seen: 0,
            harmonic_t: 0.0,
            s_t: r0.clamp(1, n.saturating_sub(1).max(1)),
        }
    }

    /// Folds in the next position and returns the updated cutoff.
    pub fn update(&mut self, is_record: bool) -> usize {
        self.t += 1;
        self.harmonic_t += 1.0 / self.t as f64;
        if is_record {
            self.records_seen += 1;
        }
        let bound = self.cap * (self.t as f64).ln().sqrt();
        let deviation = self.records_seen as f64 - self.harmonic_t;
        let shift = (self.gamma * deviation).clamp(-bound, bound);
        let upper = self.n.saturating_sub(1).max(1) as f64;
        self.s_t = (self.r0 as f64 - shift).round().clamp(1.0, upper) as usize;
        self.s_t
    }

    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn records_seen(&self) -> usize {
        self.records_seen
    }

    pub fn harmonic_t(&self) -> f64 {
        self.harmonic_t
    }

    /// Current cutoff `s_t`.
    pub fn cutoff(&self) -> usize {
        self.s_t
    }

    /// Damping bound `cap * sqrt(ln t)` at the current position.
    pub fn damping_bound(&self) -> f64 {
        self.cap * (self.t.max(1) as f64).ln().sqrt()
    }
}

/// Accept a record at `t` iff `t > s_t`, with `s_t` updated first.
#[derive(Debug, Clone)]
pub struct AdaptiveRule {
    state: AdaptiveState,
    pub(crate) clock: Clock,
}

impl AdaptiveRule {
    pub(crate) fn new(cutoffs: &CutoffSet, params: &RuleParams) -> Self {
        Self {
            state: AdaptiveState::new(cutoffs.n, cutoffs.r0, params),
            clock: Clock::new(cutoffs.n),
        }
    }

    pub fn state(&self) -> &AdaptiveState {
        &self.state
    }

    pub fn observe(&mut self, obs: Observation) -> Result<Decision, RuleError> {
        self.clock.check(obs)?;
        let cutoff = self.state.update(obs.is_record);
        let accept = obs.is_record && obs.t > cutoff;
        Ok(self.clock.commit(obs.t, Decision::from_bool(accept)))
    }
}
