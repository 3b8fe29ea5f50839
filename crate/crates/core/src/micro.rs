//! A fully enumerable instance of the game used as an exact oracle.
//!
//! One GU per cell, powers {0, 50 mW}, three battery levels, and a single
//! hover point, so there are 6 states and 2 actions. Every cell has
//! `neighbors` co-channel neighbours; a transmission succeeds when at most
//! `tolerance` of them transmit, each doing so independently with the
//! mean-field's transmit mass. Transmitting drains one battery level, a
//! sunny slot restores one. Rewards are in the simulator's raw units.

use rand::Rng;

use crate::agent::MeanFieldEnv;
use crate::env::{total_energy, ActionSpace, DemandChain, EnergyParams, Mode, SlotTiming, StateSpace};
use crate::mfg::{MeanField, MfDims, MfgError, Propagator};
use crate::rng::{stream, tag, SimRng};
use crate::softq::{tabular_soft_value_iteration, EnumerableMdp, Environment, StepMetrics, TabularSolution};

pub const STATES: usize = 6;
pub const ACTIONS: usize = 2;
pub const LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MicroSpec {
    pub demand: DemandChain,
    pub neighbors: usize,
    pub tolerance: usize,
    /// Reward of a successful slot: energy efficiency of a hovering 50 mW slot.
    pub success_reward: f64,
    /// Interference penalty of transmitting for a whole slot.
    pub transmit_penalty: f64,
    /// Extra penalty for transmitting from the lowest battery level.
    pub empty_penalty: f64,
    /// Probability a slot is sunny (one level recharged).
    pub sunny: f64,
    /// Reward scale applied before learning, as in the trainer.
    pub reward_scale: f64,
    pub gamma: f64,
    /// Entropy weight.
    pub phi: f64,
}

impl MicroSpec {
    /// Rewards from the simulator's formulas: a 60 s hovering slot at 50 mW
    /// that delivers `tau B log2(1 + eta)` bits, and `sigma p tau` penalty
    /// with `sigma = 800`.
    pub fn standard() -> Self {
        let timing = SlotTiming { tau1: 25.0, tau2: 35.0 };
        let energy = EnergyParams::default();
        let e_total = total_energy(Mode::Hover, 0.05, 0.0, &energy, &timing);
        let bits = timing.tau() * 1e6;
        Self {
            demand: DemandChain::new(0.3, 0.7).expect("valid chain"),
            neighbors: 8,
            tolerance: 3,
            success_reward: bits / e_total,
            transmit_penalty: 800.0 * 0.05 * timing.tau(),
            empty_penalty: 2000.0,
            sunny: 0.5,
            reward_scale: 1e-3,
            gamma: 0.9,
            phi: 0.5,
        }
    }

    pub fn dims() -> MfDims {
        MfDims { states: StateSpace::new(1, LEVELS), actions: ActionSpace::new(1, 2) }
    }

    /// State index of (demand bit, battery level).
    pub fn state(active: bool, level: usize) -> usize {
        usize::from(active) * LEVELS + level
    }

    pub fn decode(state: usize) -> (bool, usize) {
        (state / LEVELS == 1, state % LEVELS)
    }

    /// Probability that at most `tolerance` of the neighbours transmit.
    pub fn success_probability(&self, transmit_mass: f64) -> f64 {
        let n = self.neighbors;
        let p = transmit_mass.clamp(0.0, 1.0);
        (0..=self.tolerance.min(n))
            .map(|k| binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32))
            .sum()
    }

    /// Expected raw reward of `action` in `state` against `mf`.
    pub fn reward(&self, state: usize, action: usize, mf: &MeanField) -> f64 {
        if action == 0 {
            return 0.0;
        }
        let (active, level) = Self::decode(state);
        let gain = if active { self.success_reward * self.success_probability(mf.transmit_mass()) } else { 0.0 };
        let empty = if level == 0 { self.empty_penalty } else { 0.0 };
        gain - self.transmit_penalty - empty
    }

    /// Exact transition distribution from (state, action).
    pub fn transitions(&self, state: usize, action: usize) -> Vec<(usize, f64)> {
        let (active, level) = Self::decode(state);
        let p_active = if active { self.demand.q() } else { self.demand.p() };
        let mut out = Vec::new();
        for (sunny, ps) in [(true, self.sunny), (false, 1.0 - self.sunny)] {
            let next_level = next_level(level, sunny, action == 1);
            for (x, px) in [(true, p_active), (false, 1.0 - p_active)] {
                let prob = ps * px;
                if prob > 0.0 {
                    let s = Self::state(x, next_level);
                    match out.iter_mut().find(|(t, _)| *t == s) {
                        Some((_, p)) => *p += prob,
                        None => out.push((s, prob)),
                    }
                }
            }
        }
        out
    }

    /// The MDP faced by one agent when the population follows `mf`, in
    /// scaled reward units.
    pub fn mdp(&self, mf: &MeanField) -> EnumerableMdp {
        let mut rewards = Vec::with_capacity(STATES * ACTIONS);
        let mut transitions = Vec::with_capacity(STATES * ACTIONS);
        for s in 0..STATES {
            for a in 0..ACTIONS {
                rewards.push(self.reward(s, a, mf) * self.reward_scale);
                transitions.push(self.transitions(s, a));
            }
        }
        EnumerableMdp { num_states: STATES, num_actions: ACTIONS, rewards, transitions }
    }

    pub fn solve(&self, mf: &MeanField) -> TabularSolution {
        tabular_soft_value_iteration(&self.mdp(mf), self.gamma, self.phi, 1e-12, 100_000)
    }
}

fn next_level(level: usize, sunny: bool, transmit: bool) -> usize {
    let up = usize::from(sunny);
    let down = usize::from(transmit);
    (level + up).saturating_sub(down).min(LEVELS - 1)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Stochastic policy table `pi[state][action]`.
pub type PolicyTable = Vec<[f64; ACTIONS]>;

pub fn soft_policy_table(solution: &TabularSolution, phi: f64) -> PolicyTable {
    (0..STATES)
        .map(|s| {
            let p = solution.policy(s, phi);
            [p[0], p[1]]
        })
        .collect()
}

/// Joint table `mu(s) pi(a|s)`.
pub fn joint(mu: &[f64], pi: &PolicyTable) -> Result<MeanField, MfgError> {
    let mut w = Vec::with_capacity(STATES * ACTIONS);
    for s in 0..STATES {
        for a in 0..ACTIONS {
            w.push(mu[s] * pi[s][a]);
        }
    }
    MeanField::from_weights(MicroSpec::dims(), w)
}

/// Exact push-forward of the state marginal: `mu'(s') = sum mu pi P`.
pub fn push_forward(spec: &MicroSpec, mu: &[f64], pi: &PolicyTable) -> Vec<f64> {
    let mut next = vec![0.0; STATES];
    for s in 0..STATES {
        for a in 0..ACTIONS {
            let w = mu[s] * pi[s][a];
            if w > 0.0 {
                for (t, p) in spec.transitions(s, a) {
                    next[t] += w * p;
                }
            }
        }
    }
    next
}

/// Exact propagation over `horizon` slots followed by `L' = mu' pi`.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    pub spec: MicroSpec,
    pub horizon: usize,
}

impl Propagator<PolicyTable> for ExactPropagator {
    fn propagate(&mut self, pi: &mut PolicyTable, mf: &MeanField, _iteration: usize) -> Result<MeanField, MfgError> {
        let mut mu = mf.state_marginal();
        for _ in 0..self.horizon {
            mu = push_forward(&self.spec, &mu, pi);
        }
        joint(&mu, pi)
    }
}

/// Monte Carlo propagation: `agents` agents drawn from the state marginal,
/// each stepped `slots` times under the policy, then histogrammed.
#[derive(Debug, Clone)]
pub struct SampledPropagator {
    pub spec: MicroSpec,
    pub agents: usize,
    pub slots: usize,
    pub seed: u64,
}

impl Propagator<PolicyTable> for SampledPropagator {
    fn propagate(&mut self, pi: &mut PolicyTable, mf: &MeanField, iteration: usize) -> Result<MeanField, MfgError> {
        let mut rng = stream(self.seed, tag::ROLLOUT, iteration as u64);
        let mu = mf.state_marginal();
        let mut counts = vec![0.0; STATES * ACTIONS];
        for _ in 0..self.agents {
            let mut s = draw(&mu, &mut rng);
            for _ in 0..self.slots {
                let a = usize::from(rng.random::<f64>() < pi[s][1]);
                s = draw_pairs(&self.spec.transitions(s, a), &mut rng);
            }
            let a = usize::from(rng.random::<f64>() < pi[s][1]);
            counts[s * ACTIONS + a] += 1.0;
        }
        MeanField::from_weights(MicroSpec::dims(), counts)
    }
}

fn draw<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    crate::softq::trainer::sample_index(p, rng)
}

fn draw_pairs<R: Rng + ?Sized>(pairs: &[(usize, f64)], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(s, p) in pairs {
        acc += p;
        if u < acc {
            return s;
        }
    }
    pairs.last().expect("non-empty").0
}

/// Tabular best response: exact soft Q against the frozen mean-field and
/// its soft policy.
#[derive(Debug, Clone)]
pub struct TabularBestResponse {
    pub spec: MicroSpec,
    pub last: Option<TabularSolution>,
}

impl crate::mfg::BestResponse for TabularBestResponse {
    type Policy = PolicyTable;

    fn best_response(&mut self, mf: &MeanField, _iteration: usize) -> Result<PolicyTable, MfgError> {
        let sol = self.spec.solve(mf);
        let pi = soft_policy_table(&sol, self.spec.phi);
        self.last = Some(sol);
        Ok(pi)
    }
}

/// Sampled slot interface of the micro instance for the learners.
#[derive(Debug, Clone)]
pub struct MicroEnv {
    pub spec: MicroSpec,
    transmit_mass: f64,
    state: usize,
    rng: SimRng,
}

impl MicroEnv {
    pub fn new(spec: MicroSpec, mf: &MeanField) -> Self {
        Self { spec, transmit_mass: mf.transmit_mass(), state: 0, rng: stream(0, tag::OUTCOME, 0) }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn set_state(&mut self, state: usize) {
        self.state = state;
    }

    /// Local features of any micro state: demand bit, hover (always 0) and
    /// normalised battery level.
    pub fn features(state: usize) -> Vec<f64> {
        let (active, level) = MicroSpec::decode(state);
        vec![f64::from(u8::from(active)), 0.0, level as f64 / (LEVELS - 1) as f64]
    }
}

impl Environment for MicroEnv {
    fn num_actions(&self) -> usize {
        ACTIONS
    }

    fn local_width(&self) -> usize {
        3
    }

    /// Uniform random start state.
    fn reset(&mut self, episode_seed: u64) {
        self.rng = stream(episode_seed, tag::OUTCOME, 0);
        self.state = self.rng.random_range(0..STATES);
    }

    fn local_features(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(Self::features(self.state));
    }

    fn feasible(&self, mask: &mut [bool]) -> bool {
        mask.fill(true);
        true
    }

    fn step(&mut self, action: usize) -> StepMetrics {
        let spec = &self.spec;
        let (active, level) = MicroSpec::decode(self.state);
        let mut reward = 0.0;
        let mut ee = 0.0;
        if action == 1 {
            let busy = (0..spec.neighbors).filter(|_| self.rng.random::<f64>() < self.transmit_mass).count();
            if active && busy <= spec.tolerance {
                ee = spec.success_reward;
            }
            reward = ee - spec.transmit_penalty - if level == 0 { spec.empty_penalty } else { 0.0 };
        }
        let sunny = self.rng.random::<f64>() < spec.sunny;
        let next_active = spec.demand.step(active, &mut self.rng);
        self.state = MicroSpec::state(next_active, next_level(level, sunny, action == 1));
        StepMetrics {
            reward,
            ee,
            interference_penalty: if action == 1 { spec.transmit_penalty } else { 0.0 },
            power_w: if action == 1 { 0.05 } else { 0.0 },
            flew: false,
            substituted: false,
        }
    }
}

impl MeanFieldEnv for MicroEnv {
    fn set_meanfield(&mut self, mf: &MeanField) {
        self.transmit_mass = mf.transmit_mass();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfg::distance;

    #[test]
    fn transitions_are_distributions() {
        let spec = MicroSpec::standard();
        let mdp = spec.mdp(&MeanField::uniform(MicroSpec::dims()));
        mdp.validate().unwrap();
        assert!((spec.success_reward - 5933.0).abs() < 1.0);
    }

    #[test]
    fn success_probability_examples() {
        let mut spec = MicroSpec::standard();
        spec.tolerance = 1;
        assert_eq!(spec.success_probability(0.0), 1.0);
        assert!(spec.success_probability(1.0).abs() < 1e-15);
        let p = 0.25f64;
        let expect = 0.75f64.powi(8) + 8.0 * p * 0.75f64.powi(7);
        assert!((spec.success_probability(p) - expect).abs() < 1e-15);
    }

    #[test]
    fn sampled_propagation_matches_exact() {
        let spec = MicroSpec::standard();
        let mf = MeanField::uniform(MicroSpec::dims());
        let mut br = TabularBestResponse { spec: spec.clone(), last: None };
        let mut pi = crate::mfg::BestResponse::best_response(&mut br, &mf, 0).unwrap();
        let exact = ExactPropagator { spec: spec.clone(), horizon: 1 }.propagate(&mut pi, &mf, 0).unwrap();
        let sampled = SampledPropagator { spec, agents: 10_000, slots: 1, seed: 3 }
            .propagate(&mut pi, &mf, 0)
            .unwrap();
        assert!(distance(&exact, &sampled).unwrap() < 0.05);
    }

    #[test]
    fn fixed_point_contracts() {
        use crate::mfg::{solve_equilibrium, SolveConfig};
        let spec = MicroSpec::standard();
        let mut br = TabularBestResponse { spec: spec.clone(), last: None };
        let mut pr = ExactPropagator { spec, horizon: 50 };
        let cfg = SolveConfig { tol: 1e-3, max_iterations: 20, ..SolveConfig::default() };
        let eq = solve_equilibrium(MeanField::uniform(MicroSpec::dims()), &mut br, &mut pr, &cfg).unwrap();
        assert!(eq.report.converged);
        assert!(eq.report.contraction_ratios.iter().skip(2).all(|r| *r < 0.9));
    }
}
