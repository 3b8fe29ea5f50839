//! Experience collection and minibatch TD learning for the representative
//! agent against a frozen mean-field context.

use rand::Rng;

use super::replay::{Experience, ReplayBuffer};
use super::{masked_argmax, soft_policy, soft_value, Environment, SoftqError, StepMetrics};
use crate::baselines::{boltzmann_action, epsilon_greedy_action};
use crate::nn::{Adam, Gradients, Mlp, Workspace};
use crate::rng::{derive_seed, stream, tag, SimRng};

/// Behaviour policy used while collecting experience.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    /// Sample from the soft policy at the current entropy weight.
    Soft,
    /// Linear decay from `start` to `end` over the first `fraction` of training.
    EpsilonGreedy { start: f64, end: f64, fraction: f64 },
    /// Linear temperature decay over all of training.
    Boltzmann { start: f64, end: f64 },
}

/// Bootstrap rule for the TD target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRule {
    /// `r + gamma * phi log sum exp(Q~/phi)`.
    Soft,
    /// `r + gamma * max Q~`.
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub gamma: f64,
    /// Entropy weight at the start of training.
    pub phi: f64,
    /// Entropy weight at the end; equal to `phi` for no anneal.
    pub phi_end: f64,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub minibatch: usize,
    pub buffer_capacity: usize,
    /// Gradient steps between hard target copies.
    pub target_period: u64,
    /// Environment steps between gradient steps.
    pub train_every: u64,
    /// Rewards are multiplied by this before entering the TD target.
    pub reward_scale: f64,
    pub exploration: Exploration,
    pub target: TargetRule,
    /// Abort when the moving loss exceeds this multiple of the initial loss.
    pub divergence_ratio: f64,
    /// Gradient steps in the initial and moving loss windows.
    pub divergence_window: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            phi: 0.5,
            phi_end: 0.5,
            lr: 0.005,
            hidden: vec![128, 64],
            minibatch: 300,
            buffer_capacity: 1000,
            target_period: 100,
            train_every: 1,
            reward_scale: 1e-3,
            exploration: Exploration::Soft,
            target: TargetRule::Soft,
            divergence_ratio: 10.0,
            divergence_window: 100,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), SoftqError> {
        let bad = |m: &str| Err(SoftqError::Shape(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.phi > 0.0 && self.phi_end > 0.0) {
            return bad("entropy weight must be positive");
        }
        if !(self.lr > 0.0) || self.minibatch == 0 || self.buffer_capacity == 0 {
            return bad("learning rate, minibatch and capacity must be positive");
        }
        if self.target_period == 0 || self.train_every == 0 {
            return bad("target period and train interval must be positive");
        }
        match self.exploration {
            Exploration::EpsilonGreedy { start, end, fraction } => {
                if !((0.0..=1.0).contains(&start) && (0.0..=1.0).contains(&end) && fraction > 0.0) {
                    return bad("epsilon must lie in [0, 1]");
                }
            }
            Exploration::Boltzmann { start, end } => {
                if !(start > 0.0 && end > 0.0) {
                    return bad("temperature must be positive");
                }
            }
            Exploration::Soft => {}
        }
        Ok(())
    }
}

/// How a frozen policy picks actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionRule {
    Greedy,
    Soft { phi: f64 },
    EpsilonGreedy { epsilon: f64 },
    Boltzmann { temperature: f64 },
}

impl ActionRule {
    pub fn pick(&self, q: &[f64], mask: &[bool], rng: &mut SimRng) -> Result<usize, SoftqError> {
        match *self {
            ActionRule::Greedy => masked_argmax(q, mask).ok_or(SoftqError::AllMasked),
            ActionRule::Soft { phi } => {
                let pi = soft_policy(q, phi, mask)?;
                Ok(sample_index(&pi, rng))
            }
            ActionRule::EpsilonGreedy { epsilon } => epsilon_greedy_action(q, epsilon, mask, rng),
            ActionRule::Boltzmann { temperature } => boltzmann_action(q, temperature, mask, rng),
        }
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            acc += pi;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Q-network with its mean-field context and action rule, frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolicy {
    pub net: Mlp,
    pub context: Vec<f64>,
    pub rule: ActionRule,
}

impl QPolicy {
    pub fn q_values(&self, local: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(local.len() + self.context.len());
        x.extend_from_slice(local);
        x.extend_from_slice(&self.context);
        self.net.predict(&x)
    }

    pub fn act(&self, local: &[f64], mask: &[bool], rng: &mut SimRng) -> Result<usize, SoftqError> {
        self.rule.pick(&self.q_values(local), mask, rng)
    }

    pub fn greedy(&self, local: &[f64], mask: &[bool]) -> Option<usize> {
        masked_argmax(&self.q_values(local), mask)
    }

    pub fn with_rule(&self, rule: ActionRule) -> Self {
        Self { rule, ..self.clone() }
    }
}

/// Aggregates of one training or evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_ee: f64,
    pub mean_interference_penalty: f64,
    pub flying_probability: f64,
    pub mean_power_w: f64,
    pub substituted: usize,
    /// Mean minibatch loss, NaN when no gradient step ran.
    pub mean_loss: f64,
}

#[derive(Default)]
struct Accum {
    n: usize,
    reward: f64,
    ee: f64,
    penalty: f64,
    flew: usize,
    power: f64,
    substituted: usize,
    loss: f64,
    losses: usize,
}

impl Accum {
    fn add(&mut self, m: &StepMetrics) {
        self.n += 1;
        self.reward += m.reward;
        self.ee += m.ee;
        self.penalty += m.interference_penalty;
        self.flew += usize::from(m.flew);
        self.power += m.power_w;
        self.substituted += usize::from(m.substituted);
    }

    fn finish(&self, episode: usize) -> EpisodeStats {
        let n = self.n.max(1) as f64;
        EpisodeStats {
            episode,
            mean_reward: self.reward / n,
            mean_ee: self.ee / n,
            mean_interference_penalty: self.penalty / n,
            flying_probability: self.flew as f64 / n,
            mean_power_w: self.power / n,
            substituted: self.substituted,
            mean_loss: if self.losses > 0 { self.loss / self.losses as f64 } else { f64::NAN },
        }
    }
}

/// Run a frozen policy for `episodes x steps` slots without learning.
pub fn evaluate<E: Environment + ?Sized>(
    env: &mut E,
    policy: &QPolicy,
    episodes: usize,
    steps: usize,
    seed: u64,
    first_episode: usize,
) -> Result<Vec<EpisodeStats>, SoftqError> {
    let mut rng = stream(seed, tag::POLICY, 1);
    let mut mask = vec![false; env.num_actions()];
    let mut local = Vec::new();
    let mut out = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let episode = first_episode + e;
        env.reset(derive_seed(seed, tag::EPISODE, episode as u64));
        let mut acc = Accum::default();
        for _ in 0..steps {
            env.local_features(&mut local);
            let a = pick_or_fallback(env, &mut mask, |m| policy.act(&local, m, &mut rng))?;
            acc.add(&env.step(a));
        }
        out.push(acc.finish(episode));
    }
    Ok(out)
}

/// With no feasible action every action is offered; the environment then
/// substitutes its null action.
fn pick_or_fallback<E: Environment + ?Sized>(
    env: &E,
    mask: &mut [bool],
    mut pick: impl FnMut(&[bool]) -> Result<usize, SoftqError>,
) -> Result<usize, SoftqError> {
    if !env.feasible(mask) {
        mask.fill(true);
    }
    pick(mask)
}

/// Minibatch loss `mean 0.5 (Q(s,a) - y)^2` and its gradient, with the
/// target `y` from the target network held constant.
pub fn loss_and_gradient(
    net: &Mlp,
    target_net: &Mlp,
    batch: &[(Vec<f64>, usize, f64, Vec<f64>)],
    gamma: f64,
    phi: f64,
    rule: TargetRule,
    grads: &mut Gradients,
) -> Result<f64, SoftqError> {
    if batch.is_empty() {
        return Err(SoftqError::Shape("empty minibatch".into()));
    }
    grads.reset();
    let mut ws = Workspace::default();
    let mut tws = Workspace::default();
    let mut dout = vec![0.0; net.output_width()];
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (x, a, r, x_next) in batch {
        let next_q = target_net.forward(x_next, &mut tws);
        let bootstrap = match rule {
            TargetRule::Soft => soft_value(next_q, phi),
            TargetRule::Max => next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        let y = r + gamma * bootstrap;
        let q = net.forward(x, &mut ws)[*a];
        let delta = q - y;
        loss += 0.5 * delta * delta * inv;
        dout.fill(0.0);
        dout[*a] = delta * inv;
        net.backward(&mut ws, &dout, grads);
    }
    if !loss.is_finite() {
        return Err(SoftqError::NonFinite(0));
    }
    Ok(loss)
}

/// Owns the online and target networks, optimiser, replay buffer and the
/// schedule clock. One trainer persists across outer iterations.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainerConfig,
    pub net: Mlp,
    pub target: Mlp,
    pub adam: Adam,
    pub buffer: ReplayBuffer,
    pub rng: SimRng,
    pub seed: u64,
    /// Mean-field contexts indexed by experience tag.
    pub contexts: Vec<Vec<f64>>,
    pub env_steps: u64,
    pub grad_steps: u64,
    /// Total environment steps the schedules anneal over.
    pub planned_steps: u64,
    pub episodes_done: usize,
    pub initial_losses: Vec<f64>,
    pub recent_losses: Vec<f64>,
}

impl Trainer {
    pub fn new(config: TrainerConfig, input_width: usize, num_actions: usize, seed: u64) -> Result<Self, SoftqError> {
        config.validate()?;
        let mut sizes = vec![input_width];
        sizes.extend(&config.hidden);
        sizes.push(num_actions);
        let mut init = stream(seed, tag::INIT, 0);
        let net = Mlp::new(&sizes, &mut init);
        let adam = Adam::new(net.num_params(), config.lr);
        Ok(Self {
            target: net.clone(),
            net,
            adam,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            rng: stream(seed, tag::POLICY, 0),
            seed,
            contexts: Vec::new(),
            env_steps: 0,
            grad_steps: 0,
            planned_steps: 1,
            episodes_done: 0,
            initial_losses: Vec::new(),
            recent_losses: Vec::new(),
            config,
        })
    }

    /// Fresh weights and optimiser state; the schedule clock keeps running.
    pub fn reinitialize(&mut self, salt: u64) {
        let sizes = self.net.sizes();
        let mut init = stream(self.seed, tag::INIT, salt + 1);
        self.net = Mlp::new(&sizes, &mut init);
        self.target = self.net.clone();
        self.adam = Adam::new(self.net.num_params(), self.config.lr);
        self.initial_losses.clear();
        self.recent_losses.clear();
    }

    /// Register the context for a new outer iteration; returns its tag.
    pub fn push_context(&mut self, context: Vec<f64>, flush: bool) -> usize {
        if flush {
            self.buffer.clear();
            self.contexts.clear();
        }
        self.contexts.push(context);
        self.contexts.len() - 1
    }

    fn progress(&self) -> f64 {
        (self.env_steps as f64 / self.planned_steps.max(1) as f64).min(1.0)
    }

    pub fn current_phi(&self) -> f64 {
        let c = &self.config;
        c.phi + (c.phi_end - c.phi) * self.progress()
    }

    /// Behaviour rule at the current point of the schedule.
    pub fn behaviour(&self) -> ActionRule {
        let t = self.progress();
        match self.config.exploration {
            Exploration::Soft => ActionRule::Soft { phi: self.current_phi() },
            Exploration::EpsilonGreedy { start, end, fraction } => {
                let f = (t / fraction).min(1.0);
                ActionRule::EpsilonGreedy { epsilon: start + (end - start) * f }
            }
            Exploration::Boltzmann { start, end } => {
                ActionRule::Boltzmann { temperature: start + (end - start) * t }
            }
        }
    }

    /// Frozen copy of the online network with the given context and rule.
    pub fn policy(&self, context: &[f64], rule: ActionRule) -> QPolicy {
        QPolicy { net: self.net.clone(), context: context.to_vec(), rule }
    }

    /// Collect experience and learn for `episodes x steps` slots against the
    /// context registered under `tag`.
    pub fn train<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        tag_index: usize,
        episodes: usize,
        steps: usize,
    ) -> Result<Vec<EpisodeStats>, SoftqError> {
        let context = self
            .contexts
            .get(tag_index)
            .cloned()
            .ok_or_else(|| SoftqError::Shape(format!("unknown context tag {tag_index}")))?;
        let width = env.local_width() + context.len();
        if width != self.net.input_width() || env.num_actions() != self.net.output_width() {
            return Err(SoftqError::Shape(format!(
                "network {:?} vs features {width} and {} actions",
                self.net.sizes(),
                env.num_actions()
            )));
        }
        let mut mask = vec![false; env.num_actions()];
        let mut local = Vec::new();
        let mut x = Vec::with_capacity(width);
        let mut ws = Workspace::default();
        let mut out = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let episode = self.episodes_done;
            env.reset(derive_seed(self.seed, tag::EPISODE, episode as u64));
            let mut acc = Accum::default();
            env.local_features(&mut local);
            for _ in 0..steps {
                x.clear();
                x.extend_from_slice(&local);
                x.extend_from_slice(&context);
                let rule = self.behaviour();
                let q = self.net.forward(&x, &mut ws);
                let rng = &mut self.rng;
                let a = pick_or_fallback(env, &mut mask, |m| rule.pick(q, m, rng))?;
                let metrics = env.step(a);
                acc.add(&metrics);
                let mut next = Vec::new();
                env.local_features(&mut next);
                self.buffer.push(Experience {
                    local: std::mem::replace(&mut local, next.clone()),
                    action: a,
                    reward: metrics.reward * self.config.reward_scale,
                    next_local: next,
                    tag: tag_index,
                });
                self.env_steps += 1;
                if self.buffer.len() >= self.config.minibatch && self.env_steps % self.config.train_every == 0 {
                    let loss = self.gradient_step()?;
                    acc.loss += loss;
                    acc.losses += 1;
                }
            }
            out.push(acc.finish(episode));
            self.episodes_done += 1;
        }
        Ok(out)
    }

    /// One minibatch update plus the periodic hard target copy.
    pub fn gradient_step(&mut self) -> Result<f64, SoftqError> {
        let idx = self.buffer.sample(self.config.minibatch, &mut self.rng);
        let batch: Vec<_> = idx
            .iter()
            .map(|&i| {
                let e = &self.buffer.items()[i];
                let ctx = &self.contexts[e.tag];
                let mut x = e.local.clone();
                x.extend_from_slice(ctx);
                let mut xn = e.next_local.clone();
                xn.extend_from_slice(ctx);
                (x, e.action, e.reward, xn)
            })
            .collect();
        let mut grads = Gradients::zeros(&self.net);
        let phi = self.current_phi();
        let loss = loss_and_gradient(
            &self.net,
            &self.target,
            &batch,
            self.config.gamma,
            phi,
            self.config.target,
            &mut grads,
        )
        .map_err(|_| SoftqError::NonFinite(self.grad_steps))?;
        self.adam.step(&mut self.net, &grads);
        self.grad_steps += 1;
        if self.grad_steps % self.config.target_period == 0 {
            self.target = self.net.clone();
        }
        self.check_divergence(loss)?;
        Ok(loss)
    }

    fn check_divergence(&mut self, loss: f64) -> Result<(), SoftqError> {
        let w = self.config.divergence_window.max(1);
        if self.initial_losses.len() < w {
            self.initial_losses.push(loss);
            return Ok(());
        }
        self.recent_losses.push(loss);
        if self.recent_losses.len() > w {
            self.recent_losses.remove(0);
        }
        if self.config.divergence_ratio > 0.0 && self.recent_losses.len() == w {
            let initial = self.initial_losses.iter().sum::<f64>() / w as f64;
            let moving = self.recent_losses.iter().sum::<f64>() / w as f64;
            if initial > 0.0 && moving > self.config.divergence_ratio * initial {
                return Err(SoftqError::Diverged { step: self.grad_steps, moving, initial });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two actions, one state; action 0 pays 1, action 1 pays 0.
    struct Bandit {
        t: usize,
    }
    impl Environment for Bandit {
        fn num_actions(&self) -> usize {
            2
        }
        fn local_width(&self) -> usize {
            1
        }
        fn reset(&mut self, _: u64) {
            self.t = 0;
        }
        fn local_features(&self, out: &mut Vec<f64>) {
            out.clear();
            out.push(1.0);
        }
        fn feasible(&self, mask: &mut [bool]) -> bool {
            mask.fill(true);
            true
        }
        fn step(&mut self, a: usize) -> StepMetrics {
            self.t += 1;
            StepMetrics { reward: if a == 0 { 1.0 } else { 0.0 }, ..Default::default() }
        }
    }

    fn small() -> TrainerConfig {
        TrainerConfig {
            hidden: vec![8],
            minibatch: 16,
            buffer_capacity: 64,
            target_period: 10,
            reward_scale: 1.0,
            lr: 0.01,
            ..TrainerConfig::default()
        }
    }

    #[test]
    fn loss_zero_when_q_matches_target() {
        let mut rng = stream(1, 0, 0);
        let net = Mlp::new(&[2, 3, 2], &mut rng);
        let x = vec![0.3, -0.4];
        let q = net.predict(&x);
        let batch = vec![(x.clone(), 1, q[1], x.clone())];
        let mut g = Gradients::zeros(&net);
        let loss = loss_and_gradient(&net, &net, &batch, 0.0, 0.5, TargetRule::Soft, &mut g).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.flat().iter().all(|v| *v == 0.0));
        let doubled = vec![(x.clone(), 1, q[1] - 2.0, x.clone())];
        let single = vec![(x.clone(), 1, q[1] - 1.0, x)];
        let l2 = loss_and_gradient(&net, &net, &doubled, 0.0, 0.5, TargetRule::Soft, &mut g).unwrap();
        let l1 = loss_and_gradient(&net, &net, &single, 0.0, 0.5, TargetRule::Soft, &mut g).unwrap();
        assert!((l2 / l1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn linear_gradient_matches_finite_difference() {
        // One weight, no bias: Q = w x.
        let mut net = Mlp { layers: vec![crate::nn::Dense { inputs: 1, outputs: 1, weights: vec![0.7], bias: vec![0.0] }] };
        let target = Mlp { layers: vec![crate::nn::Dense { inputs: 1, outputs: 1, weights: vec![0.0], bias: vec![0.0] }] };
        let x = 1.3;
        let y = 2.0;
        let batch = vec![(vec![x], 0, y, vec![0.0])];
        let mut g = Gradients::zeros(&net);
        loss_and_gradient(&net, &target, &batch, 0.0, 1.0, TargetRule::Soft, &mut g).unwrap();
        let analytic = g.weights[0][0];
        assert!((analytic - (0.7 * x - y) * x).abs() < 1e-12);
        let h = 1e-6;
        let mut f = |w: f64| {
            net.layers[0].weights[0] = w;
            loss_and_gradient(&net, &target, &batch, 0.0, 1.0, TargetRule::Soft, &mut Gradients::zeros(&net)).unwrap()
        };
        let numeric = (f(0.7 + h) - f(0.7 - h)) / (2.0 * h);
        assert!((numeric - analytic).abs() / analytic.abs() < 1e-6);
    }

    #[test]
    fn bandit_learns_better_arm_and_is_reproducible() {
        let run = || {
            let mut t = Trainer::new(small(), 1, 2, 7).unwrap();
            t.planned_steps = 2000;
            let tag = t.push_context(vec![], true);
            let stats = t.train(&mut Bandit { t: 0 }, tag, 20, 100).unwrap();
            (t.policy(&[], ActionRule::Greedy), stats)
        };
        let (p, s) = run();
        assert_eq!(p.greedy(&[1.0], &[true, true]), Some(0));
        let q = p.q_values(&[1.0]);
        // Soft fixed point: Q(0) - Q(1) = 1.
        assert!((q[0] - q[1] - 1.0).abs() < 0.2, "{q:?}");
        let (p2, s2) = run();
        assert_eq!(p, p2);
        assert_eq!(
            s.iter().map(|e| e.mean_reward.to_bits()).collect::<Vec<_>>(),
            s2.iter().map(|e| e.mean_reward.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = small();
        cfg.divergence_window = 5;
        cfg.divergence_ratio = 1e-9;
        let mut t = Trainer::new(cfg, 1, 2, 1).unwrap();
        let tag = t.push_context(vec![], true);
        let err = t.train(&mut Bandit { t: 0 }, tag, 5, 100).unwrap_err();
        assert!(matches!(err, SoftqError::Diverged { .. }));
    }

    #[test]
    fn schedules_follow_progress() {
        let mut cfg = small();
        cfg.phi_end = 0.05;
        cfg.exploration = Exploration::EpsilonGreedy { start: 1.0, end: 0.05, fraction: 0.3 };
        let mut t = Trainer::new(cfg, 1, 2, 1).unwrap();
        t.planned_steps = 1000;
        assert_eq!(t.behaviour(), ActionRule::EpsilonGreedy { epsilon: 1.0 });
        t.env_steps = 300;
        assert!(matches!(t.behaviour(), ActionRule::EpsilonGreedy { epsilon } if (epsilon - 0.05).abs() < 1e-12));
        t.env_steps = 1000;
        assert!((t.current_phi() - 0.05).abs() < 1e-12);
    }
}
