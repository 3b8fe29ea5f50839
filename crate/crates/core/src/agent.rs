//! Glue between the learners and the fixed-point iteration: a DQN-backed
//! best response and a population policy driven by a frozen Q-network.

use crate::env::{AgentAction, AgentState, EnvParams};
use crate::mfg::{BestResponse, MeanField, MfgError, PopulationPolicy, PopulationRollout, Propagator};
use crate::rng::SimRng;
use crate::softq::{encode_meanfield, encode_state, ActionRule, EpisodeStats, FeatureMode, QPolicy, Trainer};
use crate::softq::Environment;
use crate::view::RepresentativeEnv;

/// An environment whose interference population follows a mean-field.
pub trait MeanFieldEnv: Environment {
    fn set_meanfield(&mut self, mf: &MeanField);

    /// Network context for `mf` under `mode`.
    fn context(&self, mf: &MeanField, mode: FeatureMode) -> Vec<f64> {
        encode_meanfield(mf, mode)
    }
}

impl MeanFieldEnv for RepresentativeEnv {
    fn set_meanfield(&mut self, mf: &MeanField) {
        RepresentativeEnv::set_meanfield(self, mf);
    }
}

/// Training log of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub stats: Vec<EpisodeStats>,
}

/// Best response by training the representative's Q-network against the
/// frozen mean-field.
#[derive(Debug, Clone)]
pub struct DqnBestResponse<E> {
    pub trainer: Trainer,
    pub env: E,
    pub mode: FeatureMode,
    pub episodes: usize,
    pub steps: usize,
    /// Drop stored experience when the mean-field changes.
    pub flush: bool,
    /// Restart from fresh weights at every outer iteration.
    pub reinit: bool,
    /// Rule the population follows; `None` uses the trainer's current
    /// behaviour rule.
    pub population_rule: Option<ActionRule>,
    pub history: Vec<IterationLog>,
}

impl<E: MeanFieldEnv> BestResponse for DqnBestResponse<E> {
    type Policy = QPolicy;

    fn best_response(&mut self, mf: &MeanField, iteration: usize) -> Result<QPolicy, MfgError> {
        self.env.set_meanfield(mf);
        let context = self.env.context(mf, self.mode);
        if self.reinit && iteration > 0 {
            self.trainer.reinitialize(iteration as u64);
        }
        let tag = self.trainer.push_context(context.clone(), self.flush);
        let stats = self
            .trainer
            .train(&mut self.env, tag, self.episodes, self.steps)
            .map_err(|e| MfgError::BestResponse(e.to_string()))?;
        self.history.push(IterationLog { iteration, stats });
        let rule = self.population_rule.unwrap_or_else(|| self.trainer.behaviour());
        Ok(self.trainer.policy(&context, rule))
    }
}

/// Every UAV of the world acts with the same frozen Q-network on its own
/// fully observed state.
#[derive(Debug, Clone)]
pub struct PolicyAgent {
    pub params: EnvParams,
    pub policy: QPolicy,
    local: Vec<f64>,
    mask: Vec<bool>,
}

impl PolicyAgent {
    pub fn new(params: EnvParams, policy: QPolicy) -> Self {
        let n = params.action_space().size();
        Self { params, policy, local: Vec::new(), mask: vec![false; n] }
    }
}

impl PopulationPolicy for PolicyAgent {
    fn act(&mut self, _cell: usize, state: &AgentState, _record: bool, rng: &mut SimRng) -> AgentAction {
        encode_state(state, &self.params, &mut self.local);
        if !self.params.feasible_mask(state, &mut self.mask) {
            return AgentAction::null(state.prev_hover);
        }
        let a = self.policy.act(&self.local, &self.mask, rng).expect("feasible action exists");
        self.params.action_space().decode(a)
    }
}

/// Population rollout for Q-network policies.
#[derive(Debug, Clone)]
pub struct QRollout(pub PopulationRollout);

impl Propagator<QPolicy> for QRollout {
    fn propagate(&mut self, policy: &mut QPolicy, _mf: &MeanField, iteration: usize) -> Result<MeanField, MfgError> {
        let mut agent = PolicyAgent::new(self.0.params.clone(), policy.clone());
        self.0.run(&mut agent, iteration)
    }
}
