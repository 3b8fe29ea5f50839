//! Partially observable variant: each UAV sees the demand of only its
//! nearest GUs and acts on a compressed history of what it has seen.

use crate::agent::{DqnBestResponse, MeanFieldEnv};
use crate::env::{AgentAction, AgentState, EnvParams, Geometry};
use crate::mfg::{MeanField, MfgError, PopulationPolicy, PopulationRollout, Propagator};
use crate::rng::SimRng;
use crate::softq::{ActionRule, EpisodeStats, Environment, FeatureMode, QPolicy, StepMetrics, Trainer};
use crate::view::RepresentativeEnv;

/// Observation symbols. Stored beliefs use 1 for active instead.
pub const SEEN_ACTIVE: u8 = 0;
pub const SEEN_IDLE: u8 = 1;
pub const HIDDEN: u8 = 2;

/// Default staleness saturation.
pub const STALENESS_CAP: u32 = 16;

/// Staleness buckets of the observation mean-field: 0, 1..=4, 5+.
pub const STALENESS_BUCKETS: usize = 3;

/// Number of GUs observed under `coverage` out of `gus`.
pub fn observed_count(coverage: f64, gus: usize) -> usize {
    ((coverage * gus as f64 - 1e-9).ceil().max(0.0) as usize).min(gus)
}

/// Symbols for every GU seen from hover point `hover`.
pub fn observe(demand: &[bool], hover: usize, coverage: f64, geometry: &Geometry) -> Vec<u8> {
    let mut symbols = vec![HIDDEN; demand.len()];
    for &u in geometry.nearest_gus(hover).iter().take(observed_count(coverage, demand.len())) {
        symbols[u] = if demand[u] { SEEN_ACTIVE } else { SEEN_IDLE };
    }
    symbols
}

/// Last-seen demand bit and slots since it was seen, per GU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedHistory {
    pub belief: Vec<bool>,
    pub staleness: Vec<u32>,
    pub cap: u32,
}

impl CompressedHistory {
    /// Nothing seen yet: every GU believed idle with zero staleness.
    pub fn new(gus: usize, cap: u32) -> Self {
        Self { belief: vec![false; gus], staleness: vec![0; gus], cap }
    }

    pub fn update(&mut self, symbols: &[u8]) {
        assert_eq!(symbols.len(), self.belief.len(), "observation width");
        for (u, &sym) in symbols.iter().enumerate() {
            if sym == HIDDEN {
                self.staleness[u] = (self.staleness[u] + 1).min(self.cap);
            } else {
                self.belief[u] = sym == SEEN_ACTIVE;
                self.staleness[u] = 0;
            }
        }
    }

    pub fn active_beliefs(&self) -> usize {
        self.belief.iter().filter(|&&b| b).count()
    }

    pub fn staleness_bucket(&self) -> usize {
        match self.staleness.iter().copied().max().unwrap_or(0) {
            0 => 0,
            1..=4 => 1,
            _ => 2,
        }
    }

    /// Beliefs, scaled staleness, hover and battery level: `2U + 2` entries.
    pub fn encode(&self, state: &AgentState, params: &EnvParams, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.belief.iter().map(|&b| f64::from(u8::from(b))));
        out.extend(self.staleness.iter().map(|&h| f64::from(h) / f64::from(self.cap)));
        let u = params.num_gus();
        out.push(if u > 1 { state.prev_hover as f64 / (u - 1) as f64 } else { 0.0 });
        let space = params.state_space();
        let level = space.quantize(state.battery, params.energy.e_max);
        out.push(if space.levels > 1 { level as f64 / (space.levels - 1) as f64 } else { 0.0 });
    }
}

/// Cell layout of the observation mean-field: active-belief count,
/// staleness bucket, hover point and power index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsLayout {
    pub gus: usize,
    pub powers: usize,
}

impl ObsLayout {
    pub fn of(params: &EnvParams) -> Self {
        Self { gus: params.num_gus(), powers: params.energy.power_levels.len() }
    }

    pub fn size(&self) -> usize {
        (self.gus + 1) * STALENESS_BUCKETS * self.gus * self.powers
    }

    pub fn index(&self, history: &CompressedHistory, action: &AgentAction) -> usize {
        ((history.active_beliefs() * STALENESS_BUCKETS + history.staleness_bucket()) * self.gus + action.hover)
            * self.powers
            + action.power_idx
    }

    /// Per-axis marginals: `(U + 1) + 3 + U + L_p` entries.
    pub fn context(&self, table: &[f64]) -> Vec<f64> {
        let (g, p) = (self.gus, self.powers);
        let mut count = vec![0.0; g + 1];
        let mut bucket = vec![0.0; STALENESS_BUCKETS];
        let mut hover = vec![0.0; g];
        let mut power = vec![0.0; p];
        for (i, &w) in table.iter().enumerate() {
            power[i % p] += w;
            hover[(i / p) % g] += w;
            bucket[(i / (p * g)) % STALENESS_BUCKETS] += w;
            count[i / (p * g * STALENESS_BUCKETS)] += w;
        }
        [count, bucket, hover, power].concat()
    }

    pub fn context_width(&self) -> usize {
        2 * self.gus + 1 + STALENESS_BUCKETS + self.powers
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.size() as f64; self.size()]
    }
}

/// Normalised histogram of observation-mean-field indices.
pub fn observation_histogram(layout: &ObsLayout, indices: &[usize]) -> Vec<f64> {
    let mut table = vec![0.0; layout.size()];
    if indices.is_empty() {
        return layout.uniform();
    }
    let w = 1.0 / indices.len() as f64;
    for &i in indices {
        table[i] += w;
    }
    table
}

/// The representative's view with demand visible only through its
/// compressed history.
#[derive(Debug, Clone)]
pub struct PartialObsEnv {
    pub inner: RepresentativeEnv,
    pub coverage: f64,
    history: CompressedHistory,
}

impl PartialObsEnv {
    pub fn new(inner: RepresentativeEnv, coverage: f64, cap: u32) -> Self {
        let history = CompressedHistory::new(inner.params().num_gus(), cap);
        let mut env = Self { inner, coverage, history };
        env.observe();
        env
    }

    pub fn history(&self) -> &CompressedHistory {
        &self.history
    }

    fn observe(&mut self) {
        let state = self.inner.state();
        let symbols = observe(&state.demand, state.prev_hover, self.coverage, &self.inner.params().geometry);
        self.history.update(&symbols);
    }
}

impl Environment for PartialObsEnv {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn local_width(&self) -> usize {
        2 * self.inner.params().num_gus() + 2
    }

    fn reset(&mut self, episode_seed: u64) {
        self.inner.reset(episode_seed);
        self.history = CompressedHistory::new(self.history.belief.len(), self.history.cap);
        self.observe();
    }

    fn local_features(&self, out: &mut Vec<f64>) {
        self.history.encode(self.inner.state(), self.inner.params(), out);
    }

    fn feasible(&self, mask: &mut [bool]) -> bool {
        self.inner.feasible(mask)
    }

    fn step(&mut self, action: usize) -> StepMetrics {
        let m = self.inner.step(action);
        self.observe();
        m
    }
}

impl MeanFieldEnv for PartialObsEnv {
    fn set_meanfield(&mut self, mf: &MeanField) {
        self.inner.set_meanfield(mf);
    }

    /// Marginals of the observation mean-field; the feature mode is ignored.
    fn context(&self, mf: &MeanField, _mode: FeatureMode) -> Vec<f64> {
        let layout = ObsLayout::of(self.inner.params());
        if mf.observation.len() == layout.size() {
            layout.context(&mf.observation)
        } else {
            layout.context(&layout.uniform())
        }
    }
}

/// Attach a uniform observation mean-field to `mf`.
pub fn with_uniform_observation(mut mf: MeanField, params: &EnvParams) -> MeanField {
    mf.observation = ObsLayout::of(params).uniform();
    mf
}

/// Every UAV follows the same frozen network on its own compressed history.
#[derive(Debug, Clone)]
pub struct PartialObsAgent {
    pub params: EnvParams,
    pub policy: QPolicy,
    pub coverage: f64,
    pub cap: u32,
    histories: Vec<CompressedHistory>,
    recorded: Vec<usize>,
    local: Vec<f64>,
    mask: Vec<bool>,
}

impl PartialObsAgent {
    pub fn new(params: EnvParams, policy: QPolicy, coverage: f64, cap: u32) -> Self {
        let n = params.action_space().size();
        Self { params, policy, coverage, cap, histories: Vec::new(), recorded: Vec::new(), local: Vec::new(), mask: vec![false; n] }
    }
}

impl PopulationPolicy for PartialObsAgent {
    fn begin(&mut self, cells: usize) {
        self.histories = vec![CompressedHistory::new(self.params.num_gus(), self.cap); cells];
        self.recorded.clear();
    }

    fn act(&mut self, cell: usize, state: &AgentState, record: bool, rng: &mut SimRng) -> AgentAction {
        let symbols = observe(&state.demand, state.prev_hover, self.coverage, &self.params.geometry);
        let history = &mut self.histories[cell];
        history.update(&symbols);
        history.encode(state, &self.params, &mut self.local);
        let action = if self.params.feasible_mask(state, &mut self.mask) {
            let a = self.policy.act(&self.local, &self.mask, rng).expect("feasible action exists");
            self.params.action_space().decode(a)
        } else {
            AgentAction::null(state.prev_hover)
        };
        if record {
            let taken = self.params.enforce(state, action).0;
            self.recorded.push(ObsLayout::of(&self.params).index(history, &taken));
        }
        action
    }

    fn finish(&mut self, mf: &mut MeanField) {
        mf.observation = observation_histogram(&ObsLayout::of(&self.params), &self.recorded);
    }
}

/// Population rollout under partial observation.
#[derive(Debug, Clone)]
pub struct PartialObsRollout {
    pub rollout: PopulationRollout,
    pub coverage: f64,
    pub cap: u32,
}

impl Propagator<QPolicy> for PartialObsRollout {
    fn propagate(&mut self, policy: &mut QPolicy, _mf: &MeanField, iteration: usize) -> Result<MeanField, MfgError> {
        let params = self.rollout.params.clone();
        let mut agent = PartialObsAgent::new(params, policy.clone(), self.coverage, self.cap);
        self.rollout.run(&mut agent, iteration)
    }
}

/// Train the representative on `(z, L^o)` features against a frozen
/// observation mean-field and return the resulting policy.
pub fn train_pomfg(
    env: &mut PartialObsEnv,
    mf: &MeanField,
    trainer: &mut Trainer,
    episodes: usize,
    steps: usize,
    rule: ActionRule,
) -> Result<(QPolicy, Vec<EpisodeStats>), MfgError> {
    env.set_meanfield(mf);
    let context = env.context(mf, FeatureMode::Compact);
    let tag = trainer.push_context(context.clone(), false);
    let stats = trainer.train(env, tag, episodes, steps).map_err(|e| MfgError::BestResponse(e.to_string()))?;
    Ok((trainer.policy(&context, rule), stats))
}

/// Best response for the partially observable game.
pub type PartialObsBestResponse = DqnBestResponse<PartialObsEnv>;

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> EnvParams {
        EnvParams::standard(3, 3)
    }

    #[test]
    fn coverage_counts() {
        assert_eq!(observed_count(1.0, 4), 4);
        assert_eq!(observed_count(0.75, 4), 3);
        assert_eq!(observed_count(0.25, 4), 1);
        assert_eq!(observed_count(0.0, 4), 0);
        let g = params().geometry;
        let demand = [true, false, true, false];
        assert!(!observe(&demand, 2, 1.0, &g).contains(&HIDDEN));
        for (c, n) in [(0.25, 1), (0.75, 3)] {
            let sym = observe(&demand, 2, c, &g);
            assert_eq!(sym.iter().filter(|&&s| s != HIDDEN).count(), n);
        }
        // the GU under the hover point is always the first one seen
        assert_eq!(observe(&demand, 2, 0.25, &g)[2], SEEN_ACTIVE);
    }

    #[test]
    fn history_updates() {
        let mut h = CompressedHistory::new(4, STALENESS_CAP);
        h.update(&[SEEN_ACTIVE, SEEN_IDLE, SEEN_IDLE, SEEN_IDLE]);
        assert_eq!(h.staleness, vec![0; 4]);
        for _ in 0..3 {
            h.update(&[HIDDEN, SEEN_IDLE, SEEN_IDLE, HIDDEN]);
        }
        assert!(h.belief[0]);
        assert_eq!(h.staleness[0], 3);
        assert_eq!(h.staleness[3], 3);
        for _ in 0..2 {
            h.update(&[HIDDEN; 4]);
        }
        assert_eq!(h.staleness, vec![5, 2, 2, 5]);
        for _ in 0..40 {
            h.update(&[HIDDEN; 4]);
        }
        assert_eq!(h.staleness, vec![STALENESS_CAP; 4]);
        assert_eq!(h.belief, vec![true, false, false, false]);
    }

    #[test]
    fn layout_marginals() {
        let p = params();
        let layout = ObsLayout::of(&p);
        assert_eq!(layout.size(), 300);
        let ctx = layout.context(&layout.uniform());
        assert_eq!(ctx.len(), layout.context_width());
        assert!((ctx.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        let mut h = CompressedHistory::new(4, STALENESS_CAP);
        h.update(&[SEEN_ACTIVE, SEEN_ACTIVE, HIDDEN, HIDDEN]);
        h.update(&[HIDDEN, SEEN_ACTIVE, SEEN_IDLE, HIDDEN]);
        let a = AgentAction::new(Some(1), 3, 2).unwrap();
        let i = layout.index(&h, &a);
        assert_eq!(i, ((2 * 3 + 1) * 4 + 3) * 5 + 2);
        let table = observation_histogram(&layout, &[i]);
        let ctx = layout.context(&table);
        assert_eq!(ctx[2], 1.0);
        assert_eq!(ctx[5 + 1], 1.0);
        assert_eq!(ctx[8 + 3], 1.0);
        assert_eq!(ctx[12 + 2], 1.0);
    }

    #[test]
    fn full_coverage_sees_true_state() {
        let p = params();
        let mf = MeanField::uniform(crate::mfg::MfDims::of(&p));
        let mut env = PartialObsEnv::new(RepresentativeEnv::new(p, &mf), 1.0, STALENESS_CAP);
        env.reset(7);
        for t in 0..50 {
            assert_eq!(env.history().belief, env.inner.state().demand);
            assert!(env.history().staleness.iter().all(|&h| h == 0));
            let mut mask = vec![false; env.num_actions()];
            env.feasible(&mut mask);
            let a = (0..mask.len()).map(|i| (i + 7 * t) % mask.len()).find(|&i| mask[i]).unwrap();
            env.step(a);
        }
    }

    #[test]
    fn zero_coverage_never_learns_demand() {
        let p = params();
        let mf = MeanField::uniform(crate::mfg::MfDims::of(&p));
        let mut env = PartialObsEnv::new(RepresentativeEnv::new(p, &mf), 0.0, STALENESS_CAP);
        env.reset(3);
        for _ in 0..30 {
            env.step(0);
            assert_eq!(env.history().belief, vec![false; 4]);
        }
        assert_eq!(env.history().staleness, vec![STALENESS_CAP; 4]);
    }
}
