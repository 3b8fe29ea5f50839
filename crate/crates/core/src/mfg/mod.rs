//! Mean-field distributions over the representative UAV's (state, action)
//! space and the two-step fixed-point iteration that searches for the
//! stationary equilibrium.

pub mod rollout;
mod solve;

pub use rollout::{PopulationPolicy, PopulationRollout};
pub use solve::{solve_equilibrium, BestResponse, Equilibrium, EquilibriumReport, Propagator, SolveConfig};

use crate::env::{ActionSpace, EnvParams, IfLayout, StateSpace};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MfgError {
    #[error("empty population")]
    EmptyPopulation,
    #[error("shape mismatch: {0} vs {1}")]
    Shape(usize, usize),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("best response failed: {0}")]
    BestResponse(String),
    #[error("propagation failed: {0}")]
    Propagation(String),
}

/// Sizes of the encoded state and action spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MfDims {
    pub states: StateSpace,
    pub actions: ActionSpace,
}

impl MfDims {
    pub fn of(params: &EnvParams) -> Self {
        Self { states: params.state_space(), actions: params.action_space() }
    }

    pub fn joint_size(&self) -> usize {
        self.states.size() * self.actions.size()
    }

    pub fn layout(&self) -> IfLayout {
        IfLayout::new(self.actions.gus, self.actions.powers)
    }
}

/// Joint (state, action) distribution plus its interference marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub dims: MfDims,
    /// Row-major over `state * |A| + action`.
    pub joint: Vec<f64>,
    pub marginal_if: Vec<f64>,
    /// Optional observation-space histogram carried alongside (partially
    /// observable runs); empty otherwise.
    pub observation: Vec<f64>,
}

impl MeanField {
    /// Normalises `weights` and derives the interference marginal.
    pub fn from_weights(dims: MfDims, mut weights: Vec<f64>) -> Result<Self, MfgError> {
        if weights.len() != dims.joint_size() {
            return Err(MfgError::Shape(weights.len(), dims.joint_size()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(MfgError::EmptyPopulation);
        }
        weights.iter_mut().for_each(|w| *w /= total);
        let marginal_if = interference_marginal(&dims, &weights);
        Ok(Self { dims, joint: weights, marginal_if, observation: Vec::new() })
    }

    /// Uniform over every (state, action) pair.
    pub fn uniform(dims: MfDims) -> Self {
        Self::from_weights(dims, vec![1.0; dims.joint_size()]).expect("non-empty")
    }

    pub fn point_mass(dims: MfDims, state: usize, action: usize) -> Result<Self, MfgError> {
        empirical_meanfield(dims, &[(state, action)])
    }

    pub fn state_marginal(&self) -> Vec<f64> {
        self.joint
            .chunks(self.dims.actions.size())
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Total mass of UAVs radiating while serving an active GU.
    pub fn transmit_mass(&self) -> f64 {
        let layout = self.dims.layout();
        self.marginal_if
            .iter()
            .enumerate()
            .filter(|(i, _)| layout.decode(*i).serving)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.joint.iter().sum()
    }
}

/// Push-forward of a joint table onto the interference marginal.
pub fn interference_marginal(dims: &MfDims, joint: &[f64]) -> Vec<f64> {
    let layout = dims.layout();
    let na = dims.actions.size();
    let mut out = vec![0.0; layout.size()];
    for (i, &m) in joint.iter().enumerate() {
        if m != 0.0 {
            let key = layout.key(&dims.states, &dims.actions, i / na, i % na);
            out[layout.index(key)] += m;
        }
    }
    out
}

/// Normalised histogram of observed (state index, action index) pairs.
pub fn empirical_meanfield(dims: MfDims, pairs: &[(usize, usize)]) -> Result<MeanField, MfgError> {
    if pairs.is_empty() {
        return Err(MfgError::EmptyPopulation);
    }
    let na = dims.actions.size();
    let mut counts = vec![0.0; dims.joint_size()];
    for &(s, a) in pairs {
        if s >= dims.states.size() || a >= na {
            return Err(MfgError::Index(format!("({s}, {a})")));
        }
        counts[s * na + a] += 1.0;
    }
    MeanField::from_weights(dims, counts)
}

/// Total-variation distance `0.5 * sum |a - b|`, the 1-Wasserstein distance
/// under the discrete metric.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64, MfgError> {
    if a.len() != b.len() {
        return Err(MfgError::Shape(a.len(), b.len()));
    }
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

pub fn distance(a: &MeanField, b: &MeanField) -> Result<f64, MfgError> {
    tv_distance(&a.joint, &b.joint)
}
