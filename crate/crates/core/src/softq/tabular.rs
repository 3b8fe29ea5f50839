//! Exact soft value iteration on an enumerable MDP.

use super::{masked_argmax, soft_policy, soft_value};

/// Rewards and sparse transitions indexed by `state * num_actions + action`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerableMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub rewards: Vec<f64>,
    pub transitions: Vec<Vec<(usize, f64)>>,
}

impl EnumerableMdp {
    pub fn validate(&self) -> Result<(), String> {
        let n = self.num_states * self.num_actions;
        if self.rewards.len() != n || self.transitions.len() != n {
            return Err(format!("expected {n} rows"));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            let total: f64 = row.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|(s, p)| *s >= self.num_states || *p < 0.0) {
                return Err(format!("row {i} is not a distribution"));
            }
        }
        Ok(())
    }

    /// One application of the soft Bellman operator.
    pub fn backup(&self, q: &[f64], gamma: f64, phi: f64) -> Vec<f64> {
        let na = self.num_actions;
        let v: Vec<f64> = q.chunks(na).map(|row| soft_value(row, phi)).collect();
        self.rewards
            .iter()
            .zip(&self.transitions)
            .map(|(r, row)| r + gamma * row.iter().map(|(s, p)| p * v[*s]).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularSolution {
    pub num_actions: usize,
    pub q: Vec<f64>,
    /// Sup-norm change of the final sweep.
    pub residual: f64,
    pub iterations: usize,
    /// Successive residual ratios while the residual is above rounding level.
    pub residual_ratios: Vec<f64>,
}

impl TabularSolution {
    pub fn q_row(&self, state: usize) -> &[f64] {
        &self.q[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn value(&self, state: usize, phi: f64) -> f64 {
        soft_value(self.q_row(state), phi)
    }

    pub fn greedy(&self, state: usize) -> usize {
        masked_argmax(self.q_row(state), &vec![true; self.num_actions]).expect("non-empty")
    }

    pub fn policy(&self, state: usize, phi: f64) -> Vec<f64> {
        soft_policy(self.q_row(state), phi, &vec![true; self.num_actions]).expect("non-empty")
    }
}

const RATIO_FLOOR: f64 = 1e-8;

/// Iterate `Q <- r + gamma P V_soft(Q)` from zero until the sup-norm change
/// falls below `tol` (or `max_iterations` sweeps).
pub fn tabular_soft_value_iteration(
    mdp: &EnumerableMdp,
    gamma: f64,
    phi: f64,
    tol: f64,
    max_iterations: usize,
) -> TabularSolution {
    let mut q = vec![0.0; mdp.num_states * mdp.num_actions];
    let mut residual = f64::INFINITY;
    let mut ratios = Vec::new();
    let mut iterations = 0;
    while iterations < max_iterations {
        let next = mdp.backup(&q, gamma, phi);
        let r = q.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // Ratios of rounding-level residuals carry no information.
        if residual.is_finite() && residual > RATIO_FLOOR {
            ratios.push(r / residual);
        }
        residual = r;
        q = next;
        iterations += 1;
        if residual < tol {
            break;
        }
    }
    TabularSolution { num_actions: mdp.num_actions, q, residual, iterations, residual_ratios: ratios }
}
