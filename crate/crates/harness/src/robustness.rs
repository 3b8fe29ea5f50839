//! Agent removal: train, then run the whole frozen population and take
//! UAVs out of the network part-way through evaluation.

use std::path::Path;

use mfuav_core::agent::PolicyAgent;
use mfuav_core::env::{AgentAction, World};
use mfuav_core::mfg::PopulationPolicy;
use mfuav_core::pomfg::PartialObsAgent;
use mfuav_core::rng::{derive_seed, stream, tag};
use mfuav_core::softq::{ActionRule, QPolicy};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Observation};
use crate::error::HarnessError;
use crate::run::{execute, write_csv, write_outputs};

pub const ROBUSTNESS_FILE: &str = "robustness.csv";
pub const ROBUSTNESS_SUMMARY_FILE: &str = "robustness_summary.csv";

/// Episode index offset of robustness episodes.
pub const ROBUSTNESS_EPISODE_OFFSET: u64 = 2 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub episode: usize,
    pub mean_reward: f64,
    pub active_uavs: usize,
    /// Mean SINR of the representative's served slots (phase 2, linear).
    pub representative_sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub removal_count: usize,
    pub removal_episode: usize,
    pub before_mean_reward: f64,
    pub after_mean_reward: f64,
    pub relative_change: f64,
}

/// Non-representative cells taken out, drawn once per seed.
pub fn removed_cells(cfg: &ExperimentConfig, cells: usize, representative: usize) -> Vec<usize> {
    let mut rng = stream(cfg.seed, tag::REMOVAL, 0);
    let others: Vec<usize> = (0..cells).filter(|&k| k != representative).collect();
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, others.len(), cfg.removal_count)
        .into_iter()
        .map(|i| others[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Every UAV runs `policy` for the robustness episodes; from
/// `removal_episode` on the removed cells are inactive.
pub fn evaluate_population<P: PopulationPolicy>(
    cfg: &ExperimentConfig,
    world_params: &mfuav_core::env::EnvParams,
    policy: &mut P,
) -> Result<Vec<RobustnessRow>, HarnessError> {
    let cells = world_params.geometry.num_cells();
    let rep = world_params.geometry.center_cell();
    let removed = removed_cells(cfg, cells, rep);
    let mut rows = Vec::with_capacity(cfg.robustness_episodes);
    for e in 0..cfg.robustness_episodes {
        let seed = derive_seed(cfg.seed, tag::EPISODE, ROBUSTNESS_EPISODE_OFFSET + e as u64);
        let mut world = World::new(world_params.clone(), seed).map_err(|e| HarnessError::Training(e.to_string()))?;
        if e >= cfg.removal_episode {
            for &k in &removed {
                world.deactivate(k);
            }
        }
        let mut rng = stream(seed, tag::POLICY, 0);
        policy.begin(cells);
        let (mut total, mut count) = (0.0, 0usize);
        let (mut sinr, mut served) = (0.0, 0usize);
        for _ in 0..cfg.robustness_steps {
            let actions: Vec<AgentAction> = (0..cells)
                .map(|k| {
                    let s = world.state(k);
                    if world.is_active(k) {
                        policy.act(k, s, false, &mut rng)
                    } else {
                        AgentAction::null(s.prev_hover)
                    }
                })
                .collect();
            let outcomes = world.step(&actions).map_err(|e| HarnessError::Training(e.to_string()))?;
            for (k, o) in outcomes.iter().enumerate() {
                if let Some(o) = o {
                    total += o.reward;
                    count += 1;
                    if k == rep && o.power_w > 0.0 {
                        sinr += o.sinr2;
                        served += 1;
                    }
                }
            }
        }
        rows.push(RobustnessRow {
            episode: e,
            mean_reward: total / count.max(1) as f64,
            active_uavs: world.active_count(),
            representative_sinr: if served > 0 { sinr / served as f64 } else { 0.0 },
        });
    }
    Ok(rows)
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[RobustnessRow]) -> RobustnessSummary {
    let split = cfg.removal_episode.min(rows.len());
    let mean = |r: &[RobustnessRow]| r.iter().map(|x| x.mean_reward).sum::<f64>() / r.len().max(1) as f64;
    let before = mean(&rows[..split]);
    let after = mean(&rows[split..]);
    RobustnessSummary {
        removal_count: cfg.removal_count,
        removal_episode: cfg.removal_episode,
        before_mean_reward: before,
        after_mean_reward: after,
        relative_change: (after - before).abs() / before.abs().max(f64::MIN_POSITIVE),
    }
}

fn greedy(policy: &QPolicy) -> QPolicy {
    policy.with_rule(ActionRule::Greedy)
}

/// Train, write the usual run outputs, then evaluate the frozen population
/// with removal.
pub fn run_robustness(cfg: &ExperimentConfig) -> Result<RobustnessSummary, HarnessError> {
    let dir = cfg.resolved_output();
    let ex = execute(cfg)?;
    write_outputs(&dir, cfg, &ex)?;
    if let Some(msg) = &ex.trained.failure {
        return Err(HarnessError::Training(msg.clone()));
    }
    let params = &ex.trained.params;
    let policy = greedy(&ex.trained.policy);
    let rows = match cfg.observation {
        Observation::Full => evaluate_population(cfg, params, &mut PolicyAgent::new(params.clone(), policy))?,
        Observation::Partial => {
            let mut agent = PartialObsAgent::new(params.clone(), policy, cfg.coverage, cfg.staleness_cap);
            evaluate_population(cfg, params, &mut agent)?
        }
    };
    let summary = summarize(cfg, &rows);
    write_robustness(&dir, &rows, &summary)?;
    Ok(summary)
}

pub fn write_robustness(dir: &Path, rows: &[RobustnessRow], summary: &RobustnessSummary) -> Result<(), HarnessError> {
    write_csv(&dir.join(ROBUSTNESS_FILE), rows)?;
    write_csv(&dir.join(ROBUSTNESS_SUMMARY_FILE), std::slice::from_ref(summary))
}
