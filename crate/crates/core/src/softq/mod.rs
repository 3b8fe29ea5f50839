//! Maximum-entropy mean-field DQN: soft value and policy, feature encoding,
//! replay, the trainer, checkpoints, and a tabular soft value iteration used
//! as an exact oracle.

pub mod checkpoint;
pub mod features;
pub mod replay;
pub mod tabular;
pub mod trainer;

pub use features::{encode_features, encode_meanfield, encode_state, FeatureMode};
pub use replay::{Experience, ReplayBuffer};
pub use tabular::{tabular_soft_value_iteration, EnumerableMdp, TabularSolution};
pub use trainer::{
    loss_and_gradient, ActionRule, EpisodeStats, Exploration, QPolicy, TargetRule, Trainer,
    TrainerConfig,
};

/// Single-agent slot interface the trainers learn on.
pub trait Environment {
    fn num_actions(&self) -> usize;
    /// Width of the per-agent features (the mean-field context is appended
    /// by the trainer).
    fn local_width(&self) -> usize;
    fn reset(&mut self, episode_seed: u64);
    /// Overwrite `out` with the current local features.
    fn local_features(&self, out: &mut Vec<f64>);
    /// Fill the feasibility mask; returns whether any action is feasible.
    fn feasible(&self, mask: &mut [bool]) -> bool;
    fn step(&mut self, action: usize) -> StepMetrics;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn local_width(&self) -> usize {
        (**self).local_width()
    }
    fn reset(&mut self, episode_seed: u64) {
        (**self).reset(episode_seed)
    }
    fn local_features(&self, out: &mut Vec<f64>) {
        (**self).local_features(out)
    }
    fn feasible(&self, mask: &mut [bool]) -> bool {
        (**self).feasible(mask)
    }
    fn step(&mut self, action: usize) -> StepMetrics {
        (**self).step(action)
    }
}

/// Per-slot quantities reported by an [`Environment`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    pub reward: f64,
    pub ee: f64,
    pub interference_penalty: f64,
    pub power_w: f64,
    pub flew: bool,
    pub substituted: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SoftqError {
    #[error("every action is masked")]
    AllMasked,
    #[error("non-finite loss at gradient step {0}")]
    NonFinite(u64),
    #[error("diverged at gradient step {step}: moving loss {moving} vs initial {initial}")]
    Diverged { step: u64, moving: f64, initial: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// `phi * log sum exp(q / phi)` with a max shift; `phi <= 0` gives the max.
pub fn soft_value(q: &[f64], phi: f64) -> f64 {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if phi <= 0.0 {
        return max;
    }
    let sum: f64 = q.iter().map(|v| ((v - max) / phi).exp()).sum();
    max + phi * sum.ln()
}

/// Soft value restricted to the feasible actions.
pub fn soft_value_masked(q: &[f64], phi: f64, mask: &[bool]) -> Result<f64, SoftqError> {
    let feasible: Vec<f64> = q.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
    if feasible.is_empty() {
        return Err(SoftqError::AllMasked);
    }
    Ok(soft_value(&feasible, phi))
}

/// `pi(a) = exp((q_a - V) / phi)` over feasible actions; masked actions get 0.
pub fn soft_policy(q: &[f64], phi: f64, mask: &[bool]) -> Result<Vec<f64>, SoftqError> {
    let v = soft_value_masked(q, phi, mask)?;
    let mut pi: Vec<f64> = q
        .iter()
        .zip(mask)
        .map(|(qa, m)| if *m { ((qa - v) / phi).exp() } else { 0.0 })
        .collect();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

/// Soft Bellman target `r + gamma * V(s')`.
pub fn td_target(reward: f64, next_q: &[f64], gamma: f64, phi: f64) -> f64 {
    reward + gamma * soft_value(next_q, phi)
}

/// Index of the largest feasible entry; ties go to the lowest index.
pub fn masked_argmax(q: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (v, m)) in q.iter().zip(mask).enumerate() {
        if *m && best.is_none_or(|b| *v > q[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_value_examples() {
        let c = 2.5;
        assert!((soft_value(&[c; 7], 0.3) - (c + 0.3 * 7f64.ln())).abs() < 1e-12);
        assert!((soft_value(&[1.0, 0.2, -3.0], 1e-6) - 1.0).abs() < 1e-4);
        assert!((soft_value(&[1.0, 0.0], 1.0) - (1f64.exp() + 1.0).ln()).abs() < 1e-12);
        assert!((soft_value(&[1.0, 0.0], 1.0) - 1.3133).abs() < 1e-4);
        assert_eq!(soft_value(&[1e308, 1e308], 1.0).is_finite(), true);
    }

    #[test]
    fn soft_policy_examples() {
        let pi = soft_policy(&[0.4; 5], 0.5, &[true; 5]).unwrap();
        assert!(pi.iter().all(|p| (p - 0.2).abs() < 1e-12));
        let pi = soft_policy(&[1.0, 0.0], 1.0, &[true, true]).unwrap();
        assert!((pi[0] - 0.7311).abs() < 1e-4 && (pi[1] - 0.2689).abs() < 1e-4);
        let pi = soft_policy(&[1.0, 5.0, 0.0], 1.0, &[true, false, true]).unwrap();
        assert_eq!(pi[1], 0.0);
        assert!(soft_policy(&[1.0], 1.0, &[false]).is_err());
    }

    #[test]
    fn td_target_examples() {
        assert_eq!(td_target(1.5, &[3.0, 4.0], 0.0, 0.5), 1.5);
        let c = 2.0;
        let t = td_target(1.0, &[c; 4], 0.9, 0.5);
        assert!((t - (1.0 + 0.9 * (c + 0.5 * 4f64.ln()))).abs() < 1e-12);
        // next V = 2 with a single action
        assert!((td_target(1.0, &[2.0], 0.9, 0.7) - 2.8).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_and_mask() {
        assert_eq!(masked_argmax(&[1.0, 3.0, 3.0], &[true; 3]), Some(1));
        assert_eq!(masked_argmax(&[1.0, 3.0, 3.0], &[true, false, true]), Some(2));
        assert_eq!(masked_argmax(&[1.0], &[false]), None);
    }
}
