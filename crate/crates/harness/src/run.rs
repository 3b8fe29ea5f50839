//! One experiment: solve the equilibrium with the configured learner,
//! evaluate the frozen policy and persist every output.

use std::fs;
use std::path::{Path, PathBuf};

use mfuav_core::agent::{DqnBestResponse, IterationLog, MeanFieldEnv, QRollout};
use mfuav_core::env::EnvParams;
use mfuav_core::mfg::{solve_equilibrium, EquilibriumReport, MeanField, MfDims, PopulationRollout, Propagator, SolveConfig};
use mfuav_core::pomfg::{with_uniform_observation, ObsLayout, PartialObsEnv, PartialObsRollout};
use mfuav_core::rng::{derive_seed, tag};
use mfuav_core::softq::{checkpoint, QPolicy, Trainer};
use mfuav_core::view::RepresentativeEnv;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Observation};
use crate::error::HarnessError;

pub const METRICS_FILE: &str = "metrics.csv";
pub const EQUILIBRIUM_FILE: &str = "equilibrium.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const ACTIONS_FILE: &str = "actions.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Episode index offset of evaluation episodes, keeping their seeds apart
/// from training episodes.
pub const EVAL_EPISODE_OFFSET: u64 = 1 << 32;

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub phase: String,
    pub iteration: usize,
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_ee: f64,
    pub mean_interference_penalty: f64,
    pub flying_probability: f64,
    pub mean_power_mw: f64,
    pub active_uavs: usize,
}

/// One evaluation slot of the representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRow {
    pub episode: usize,
    pub slot: usize,
    pub action: usize,
    pub prev_hover: usize,
    pub hover: usize,
    pub power_mw: f64,
    pub substituted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRow {
    pub iteration: usize,
    pub distance: f64,
    pub contraction_ratio: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub code_version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub status: String,
    pub config: ExperimentConfig,
}

/// Headline numbers of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub converged: bool,
    pub iterations: usize,
    pub train: Vec<MetricsRow>,
    pub eval: Vec<MetricsRow>,
}

impl RunSummary {
    /// Mean training reward over the last `n` episodes.
    pub fn final_reward(&self, n: usize) -> f64 {
        tail_mean(&self.train, n, |r| r.mean_reward)
    }

    pub fn eval_mean(&self, f: impl Fn(&MetricsRow) -> f64) -> f64 {
        tail_mean(&self.eval, self.eval.len(), f)
    }
}

pub fn tail_mean(rows: &[MetricsRow], n: usize, f: impl Fn(&MetricsRow) -> f64) -> f64 {
    let start = rows.len().saturating_sub(n);
    let tail = &rows[start..];
    tail.iter().map(f).sum::<f64>() / tail.len().max(1) as f64
}

/// Read access to the representative's simulator under any observation wrapper.
pub trait RepresentativeView: MeanFieldEnv {
    fn representative(&self) -> &RepresentativeEnv;
}

impl RepresentativeView for RepresentativeEnv {
    fn representative(&self) -> &RepresentativeEnv {
        self
    }
}

impl RepresentativeView for PartialObsEnv {
    fn representative(&self) -> &RepresentativeEnv {
        &self.inner
    }
}

/// The trained learner and everything needed to evaluate it.
pub struct Trained {
    pub params: EnvParams,
    pub policy: QPolicy,
    pub meanfield: MeanField,
    pub report: EquilibriumReport,
    pub history: Vec<IterationLog>,
    pub trainer: Trainer,
    pub failure: Option<String>,
}

fn solve_with<E, P>(cfg: &ExperimentConfig, params: &EnvParams, env: E, init: MeanField, mut prop: P) -> Result<(Trained, E), HarnessError>
where
    E: RepresentativeView + Clone,
    P: Propagator<QPolicy>,
{
    let mode = cfg.feature_mode();
    let context = env.context(&init, mode);
    let width = env.local_width() + context.len();
    let mut trainer = Trainer::new(cfg.trainer_config(), width, env.num_actions(), derive_seed(cfg.seed, tag::AGENT, 0))
        .map_err(|e| HarnessError::Training(e.to_string()))?;
    let per_iteration = cfg.episodes.div_ceil(cfg.outer_iterations);
    trainer.planned_steps = (per_iteration * cfg.outer_iterations * cfg.steps) as u64;
    let mut br = DqnBestResponse {
        trainer,
        env,
        mode,
        episodes: per_iteration,
        steps: cfg.steps,
        flush: cfg.flush_on_update,
        reinit: cfg.reinit_each_iteration,
        population_rule: None,
        history: Vec::new(),
    };
    let solve = SolveConfig { tol: cfg.tolerance_tv, max_iterations: cfg.outer_iterations, ..SolveConfig::default() };
    let result = solve_equilibrium(init.clone(), &mut br, &mut prop, &solve);
    let env = br.env.clone();
    let trained = match result {
        Ok(eq) => Trained {
            params: params.clone(),
            policy: eq.policy,
            meanfield: eq.meanfield,
            report: eq.report,
            history: br.history,
            trainer: br.trainer,
            failure: None,
        },
        Err(e) => Trained {
            params: params.clone(),
            policy: br.trainer.policy(&context, br.trainer.behaviour()),
            meanfield: init,
            report: EquilibriumReport::default(),
            history: br.history,
            trainer: br.trainer,
            failure: Some(e.to_string()),
        },
    };
    Ok((trained, env))
}

/// Frozen greedy evaluation of the representative, with its action log.
pub fn evaluate_greedy<E: RepresentativeView>(
    env: &mut E,
    policy: &QPolicy,
    meanfield: &MeanField,
    cfg: &ExperimentConfig,
    active_uavs: usize,
) -> (Vec<MetricsRow>, Vec<ActionRow>) {
    env.set_meanfield(meanfield);
    let mut rows = Vec::with_capacity(cfg.eval_episodes);
    let mut log = Vec::with_capacity(cfg.eval_episodes * cfg.eval_steps);
    let mut mask = vec![false; env.num_actions()];
    let mut local = Vec::new();
    for e in 0..cfg.eval_episodes {
        env.reset(derive_seed(cfg.seed, tag::EPISODE, EVAL_EPISODE_OFFSET + e as u64));
        let (mut reward, mut ee, mut pen, mut flew, mut power) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for slot in 0..cfg.eval_steps {
            env.local_features(&mut local);
            if !env.feasible(&mut mask) {
                mask.fill(true);
            }
            let a = policy.greedy(&local, &mask).expect("mask has an entry");
            let prev_hover = env.representative().state().prev_hover;
            let m = env.step(a);
            reward += m.reward;
            ee += m.ee;
            pen += m.interference_penalty;
            flew += f64::from(u8::from(m.flew));
            power += m.power_w * 1e3;
            log.push(ActionRow {
                episode: e,
                slot,
                action: a,
                prev_hover,
                hover: env.representative().state().prev_hover,
                power_mw: m.power_w * 1e3,
                substituted: m.substituted,
            });
        }
        let n = cfg.eval_steps as f64;
        rows.push(MetricsRow {
            phase: "eval".into(),
            iteration: 0,
            episode: e,
            mean_reward: reward / n,
            mean_ee: ee / n,
            mean_interference_penalty: pen / n,
            flying_probability: flew / n,
            mean_power_mw: power / n,
            active_uavs,
        });
    }
    (rows, log)
}

fn train_rows(history: &[IterationLog], active_uavs: usize) -> Vec<MetricsRow> {
    history
        .iter()
        .flat_map(|log| {
            log.stats.iter().map(move |s| MetricsRow {
                phase: "train".into(),
                iteration: log.iteration,
                episode: s.episode,
                mean_reward: s.mean_reward,
                mean_ee: s.mean_ee,
                mean_interference_penalty: s.mean_interference_penalty,
                flying_probability: s.flying_probability,
                mean_power_mw: s.mean_power_w * 1e3,
                active_uavs,
            })
        })
        .collect()
}

pub fn equilibrium_rows(report: &EquilibriumReport, floor: f64) -> Vec<EquilibriumRow> {
    report
        .distances
        .iter()
        .enumerate()
        .map(|(k, &d)| EquilibriumRow {
            iteration: k,
            distance: d,
            contraction_ratio: (k > 0 && report.distances[k - 1] > floor).then(|| d / report.distances[k - 1]),
            converged: report.converged && k + 1 == report.distances.len(),
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}

pub fn write_manifest(dir: &Path, cfg: &ExperimentConfig, status: &str) -> Result<(), HarnessError> {
    let m = Manifest {
        schema_version: crate::config::SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config_sha256: config_hash(cfg),
        status: status.into(),
        config: cfg.clone(),
    };
    fs::write(dir.join(MANIFEST_FILE), toml::to_string(&m).expect("manifest serializes"))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, HarnessError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| crate::error::ConfigError::Parse(e.to_string()))?;
    let config = match table.remove("config") {
        Some(toml::Value::Table(t)) => ExperimentConfig::from_table(t)?,
        _ => return Err(crate::error::ConfigError::Schema("manifest has no [config] table".into()).into()),
    };
    let field = |k: &str| table.get(k).cloned().ok_or_else(|| crate::error::ConfigError::Schema(format!("manifest lacks `{k}`")));
    Ok(Manifest {
        schema_version: field("schema_version")?.as_integer().unwrap_or(0) as u32,
        code_version: field("code_version")?.as_str().unwrap_or_default().into(),
        seed: field("seed")?.as_integer().unwrap_or(0) as u64,
        config_sha256: field("config_sha256")?.as_str().unwrap_or_default().into(),
        status: field("status")?.as_str().unwrap_or_default().into(),
        config,
    })
}

/// Everything a run produces before it is written out.
pub struct Execution {
    pub trained: Trained,
    pub train: Vec<MetricsRow>,
    pub eval: Vec<MetricsRow>,
    pub actions: Vec<ActionRow>,
}

/// Train and evaluate without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Execution, HarnessError> {
    let params = cfg.env_params()?;
    let dims = MfDims::of(&params);
    let population = params.geometry.num_cells();
    let rollout = PopulationRollout {
        slots: cfg.rollout_slots,
        averaged: cfg.rollout_averaged,
        ..PopulationRollout::new(params.clone(), cfg.seed)
    };
    let init = MeanField::uniform(dims);
    let view = RepresentativeEnv::new(params.clone(), &init);
    let (trained, eval, actions) = match cfg.observation {
        Observation::Full => {
            let (trained, mut env) = solve_with(cfg, &params, view, init, QRollout(rollout))?;
            let (eval, actions) = evaluate_greedy(&mut env, &trained.policy, &trained.meanfield, cfg, population);
            (trained, eval, actions)
        }
        Observation::Partial => {
            let init = with_uniform_observation(init, &params);
            debug_assert_eq!(init.observation.len(), ObsLayout::of(&params).size());
            let env = PartialObsEnv::new(view, cfg.coverage, cfg.staleness_cap);
            let prop = PartialObsRollout { rollout, coverage: cfg.coverage, cap: cfg.staleness_cap };
            let (trained, mut env) = solve_with(cfg, &params, env, init, prop)?;
            let (eval, actions) = evaluate_greedy(&mut env, &trained.policy, &trained.meanfield, cfg, population);
            (trained, eval, actions)
        }
    };
    let train = train_rows(&trained.history, population);
    Ok(Execution { trained, train, eval, actions })
}

/// Persist an execution into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, ex: &Execution) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let rows: Vec<MetricsRow> = ex.train.iter().chain(&ex.eval).cloned().collect();
    write_csv(&dir.join(METRICS_FILE), &rows)?;
    let floor = SolveConfig::default().ratio_floor;
    write_csv(&dir.join(EQUILIBRIUM_FILE), &equilibrium_rows(&ex.trained.report, floor))?;
    write_csv(&dir.join(ACTIONS_FILE), &ex.actions)?;
    checkpoint::save(&ex.trained.trainer, &dir.join(CHECKPOINT_FILE))?;
    let status = match &ex.trained.failure {
        None => "complete".to_string(),
        Some(msg) => format!("failed: {msg}"),
    };
    write_manifest(dir, cfg, &status)
}

/// Run one experiment into its output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let dir = cfg.resolved_output();
    let ex = execute(cfg)?;
    write_outputs(&dir, cfg, &ex)?;
    if let Some(msg) = &ex.trained.failure {
        return Err(HarnessError::Training(msg.clone()));
    }
    Ok(RunSummary {
        dir,
        converged: ex.trained.report.converged,
        iterations: ex.trained.report.iterations,
        train: ex.train,
        eval: ex.eval,
    })
}
