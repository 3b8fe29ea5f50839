//! Experiment configuration: flat TOML keys with units in their names.
//!
//! Absent keys take the defaults of the chosen `scale`. `paper` is the full
//! 19x19 network with 1000 episodes of 200 steps; `desk` is a 7x7 network
//! with 300 episodes of 100 steps.

use std::path::{Path, PathBuf};

use mfuav_core::baselines::{Algorithm, BaselineConfig};
use mfuav_core::env::{db_to_linear, dbm_to_watts, ChannelParams, DemandChain, EnergyParams, EnvParams, Geometry};
use mfuav_core::env::{LinkParams, RewardParams, SlotTiming};
use mfuav_core::softq::{FeatureMode, TrainerConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::ConfigError;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "MFUAV_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Paper,
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observation {
    Full,
    Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanFieldFeatures {
    Compact,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scale: Scale,
    pub seed: u64,
    pub algorithm: String,

    pub grid_rows: usize,
    pub grid_cols: usize,
    pub cell_side_m: f64,
    pub altitude_m: f64,
    pub gus_per_cell: usize,

    pub demand_p: f64,
    pub demand_q: f64,

    pub tau_s: f64,
    pub tau1_s: f64,
    pub tau2_s: f64,
    pub bandwidth_hz: f64,
    pub n0_dbm: f64,
    pub eta_db: f64,
    pub sigma_per_j: f64,
    pub xi_per_j: f64,

    pub power_levels_mw: Vec<f64>,
    pub circuit_power_w: f64,
    pub e_max_j: f64,
    pub e_min_j: f64,
    pub max_speed_mps: f64,
    pub cloud_levels_m: Vec<f64>,
    pub energy_levels: usize,

    pub gamma: f64,
    pub phi: f64,
    pub phi_end: f64,
    pub learning_rate: f64,
    pub hidden_layers: Vec<usize>,
    pub minibatch: usize,
    pub buffer_capacity: usize,
    pub target_period: u64,
    pub train_every: u64,
    pub reward_scale: f64,
    pub divergence_ratio: f64,
    pub divergence_window: usize,
    pub meanfield_features: MeanFieldFeatures,

    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_fraction: f64,
    pub temperature_start: f64,
    pub temperature_end: f64,

    pub outer_iterations: usize,
    pub tolerance_tv: f64,
    pub episodes: usize,
    pub steps: usize,
    pub flush_on_update: bool,
    pub reinit_each_iteration: bool,
    pub rollout_slots: usize,
    pub rollout_averaged: usize,
    pub eval_episodes: usize,
    pub eval_steps: usize,

    pub observation: Observation,
    pub coverage: f64,
    pub staleness_cap: u32,

    pub removal_count: usize,
    pub removal_episode: usize,
    pub robustness_episodes: usize,
    pub robustness_steps: usize,

    pub sweep_q: Vec<f64>,
    pub sweep_sigma_per_j: Vec<f64>,
    pub sweep_eta_db: Vec<f64>,
    pub sweep_coverage: Vec<f64>,
    pub sweep_algorithm: Vec<String>,
    pub sweep_seed: Vec<u64>,
    pub jobs: usize,

    pub output_dir: PathBuf,
}

fn scale_defaults(scale: Scale) -> Table {
    let (grid, episodes, steps) = match scale {
        Scale::Paper => (19, 1000, 200),
        Scale::Desk => (7, 300, 100),
    };
    let mut t = Table::new();
    t.insert("grid_rows".into(), Value::Integer(grid));
    t.insert("grid_cols".into(), Value::Integer(grid));
    t.insert("episodes".into(), Value::Integer(episodes));
    t.insert("steps".into(), Value::Integer(steps));
    t
}

fn base_defaults() -> ExperimentConfig {
    let trainer = TrainerConfig::default();
    let baseline = BaselineConfig::default();
    let energy = EnergyParams::default();
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        scale: Scale::Paper,
        seed: 0,
        algorithm: Algorithm::MeMfdqn.name().into(),
        grid_rows: 19,
        grid_cols: 19,
        cell_side_m: 1000.0,
        altitude_m: 100.0,
        gus_per_cell: 4,
        demand_p: 0.3,
        demand_q: 0.7,
        tau_s: 60.0,
        tau1_s: 25.0,
        tau2_s: 35.0,
        bandwidth_hz: 1e6,
        n0_dbm: -110.0,
        eta_db: 0.0,
        sigma_per_j: 240.0,
        xi_per_j: 0.001,
        power_levels_mw: energy.power_levels.iter().map(|p| p * 1e3).collect(),
        circuit_power_w: energy.circuit_power,
        e_max_j: energy.e_max,
        e_min_j: energy.e_min_alarm,
        max_speed_mps: energy.max_speed,
        cloud_levels_m: energy.harvest.cloud_levels.clone(),
        energy_levels: 8,
        gamma: trainer.gamma,
        phi: trainer.phi,
        phi_end: trainer.phi_end,
        learning_rate: trainer.lr,
        hidden_layers: trainer.hidden.clone(),
        minibatch: trainer.minibatch,
        buffer_capacity: trainer.buffer_capacity,
        target_period: trainer.target_period,
        train_every: trainer.train_every,
        reward_scale: trainer.reward_scale,
        divergence_ratio: trainer.divergence_ratio,
        divergence_window: trainer.divergence_window,
        meanfield_features: MeanFieldFeatures::Compact,
        epsilon_start: baseline.epsilon_start,
        epsilon_end: baseline.epsilon_end,
        epsilon_fraction: baseline.epsilon_fraction,
        temperature_start: baseline.temperature_start,
        temperature_end: baseline.temperature_end,
        outer_iterations: 10,
        tolerance_tv: 0.01,
        episodes: 1000,
        steps: 200,
        flush_on_update: false,
        reinit_each_iteration: false,
        rollout_slots: 50,
        rollout_averaged: 25,
        eval_episodes: 10,
        eval_steps: 100,
        observation: Observation::Full,
        coverage: 1.0,
        staleness_cap: mfuav_core::pomfg::STALENESS_CAP,
        removal_count: 0,
        removal_episode: 50,
        robustness_episodes: 100,
        robustness_steps: 100,
        sweep_q: Vec::new(),
        sweep_sigma_per_j: Vec::new(),
        sweep_eta_db: Vec::new(),
        sweep_coverage: Vec::new(),
        sweep_algorithm: Vec::new(),
        sweep_seed: Vec::new(),
        jobs: 1,
        output_dir: PathBuf::from("runs/default"),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        base_defaults()
    }
}

impl ExperimentConfig {
    /// Defaults for `scale` with every other key at its standard value.
    pub fn for_scale(scale: Scale) -> Self {
        let mut t = Table::new();
        t.insert("scale".into(), Value::try_from(scale).expect("scale serializes"));
        Self::from_table(t).expect("defaults are valid")
    }

    /// Fill absent keys from the scale and standard defaults, then validate.
    pub fn from_table(table: Table) -> Result<Self, ConfigError> {
        let scale = match table.get("scale") {
            None => Scale::Paper,
            Some(v) => Scale::deserialize(v.clone()).map_err(|e| ConfigError::Schema(format!("scale: {e}")))?,
        };
        let mut full = match Value::try_from(base_defaults()).expect("defaults serialize") {
            Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        };
        for (k, v) in scale_defaults(scale) {
            full.insert(k, v);
        }
        let known: Vec<String> = full.keys().cloned().collect();
        for key in table.keys() {
            if !known.contains(key) {
                return Err(ConfigError::Schema(format!("unknown key `{key}`")));
            }
        }
        full.extend(table);
        let cfg = Self::deserialize(Value::Table(full)).map_err(|e| ConfigError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Self::from_table(table)
    }

    /// Apply `key=value` overrides, each value parsed as a TOML value and
    /// falling back to a plain string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut table = self.to_table();
        // A new scale replaces keys still at the old scale's defaults.
        if overrides.iter().any(|(k, _)| k == "scale") {
            for (k, v) in scale_defaults(self.scale) {
                if table.get(&k) == Some(&v) {
                    table.remove(&k);
                }
            }
        }
        for (key, raw) in overrides {
            let key = key.replace('-', "_");
            let value = parse_value(raw);
            table.insert(key, value);
        }
        Self::from_table(table)
    }

    pub fn to_table(&self) -> Table {
        match Value::try_from(self).expect("config serializes") {
            Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = |key: &str, msg: &str| Err(ConfigError::Unit { key: key.into(), message: msg.into() });
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if Algorithm::parse(&self.algorithm).is_none() {
            return Err(ConfigError::Schema(format!("unknown algorithm `{}`", self.algorithm)));
        }
        for a in &self.sweep_algorithm {
            if Algorithm::parse(a).is_none() {
                return Err(ConfigError::Schema(format!("unknown algorithm `{a}` in sweep_algorithm")));
            }
        }
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if !prob(self.demand_p) {
            return unit("demand_p", "probability must lie in [0, 1]");
        }
        if !prob(self.demand_q) {
            return unit("demand_q", "probability must lie in [0, 1]");
        }
        if self.sweep_q.iter().any(|&q| !prob(q)) {
            return unit("sweep_q", "probabilities must lie in [0, 1]");
        }
        if !prob(self.coverage) || self.sweep_coverage.iter().any(|&c| !prob(c)) {
            return unit("coverage", "coverage fraction must lie in [0, 1]");
        }
        if !(self.tau1_s > 0.0 && self.tau2_s > 0.0) {
            return unit("tau1_s", "phase durations must be positive seconds");
        }
        if (self.tau1_s + self.tau2_s - self.tau_s).abs() > 1e-9 {
            return unit("tau_s", "slot length must equal tau1_s + tau2_s");
        }
        if !(self.bandwidth_hz > 0.0) {
            return unit("bandwidth_hz", "bandwidth must be positive");
        }
        if !self.n0_dbm.is_finite() || !self.eta_db.is_finite() || self.sweep_eta_db.iter().any(|v| !v.is_finite()) {
            return unit("eta_db", "decibel values must be finite");
        }
        if !(self.sigma_per_j >= 0.0) || self.sweep_sigma_per_j.iter().any(|&s| !(s >= 0.0)) {
            return unit("sigma_per_j", "interference penalty must be non-negative");
        }
        if !(self.xi_per_j >= 0.0) {
            return unit("xi_per_j", "energy penalty must be non-negative");
        }
        if !(self.cell_side_m > 0.0 && self.altitude_m > 0.0) {
            return unit("cell_side_m", "lengths must be positive metres");
        }
        if self.power_levels_mw.first() != Some(&0.0) || self.power_levels_mw.windows(2).any(|w| !(w[0] < w[1])) {
            return unit("power_levels_mw", "levels must start at 0 mW and ascend strictly");
        }
        if !(self.e_max_j > self.e_min_j && self.e_min_j > 0.0) {
            return unit("e_max_j", "need e_max_j > e_min_j > 0");
        }
        if self.grid_rows == 0 || self.grid_cols == 0 || self.grid_rows * self.grid_cols < 2 {
            return Err(ConfigError::Schema("grid needs at least two cells".into()));
        }
        if self.episodes == 0 || self.steps == 0 || self.outer_iterations == 0 || self.eval_steps == 0 {
            return Err(ConfigError::Schema("episode, step and iteration counts must be positive".into()));
        }
        if self.rollout_averaged == 0 || self.rollout_averaged > self.rollout_slots {
            return Err(ConfigError::Schema("rollout_averaged must lie in 1..=rollout_slots".into()));
        }
        if self.removal_count >= self.grid_rows * self.grid_cols {
            return Err(ConfigError::Schema("removal_count must be below the population".into()));
        }
        if self.removal_episode > self.robustness_episodes {
            return Err(ConfigError::Schema("removal_episode exceeds robustness_episodes".into()));
        }
        if self.staleness_cap == 0 || self.jobs == 0 {
            return Err(ConfigError::Schema("staleness_cap and jobs must be positive".into()));
        }
        self.env_params()?;
        self.trainer_config().validate().map_err(|e| ConfigError::Schema(e.to_string()))?;
        self.baseline_config().validate().map_err(|e| ConfigError::Schema(e.to_string()))?;
        Ok(())
    }

    pub fn algorithm(&self) -> Algorithm {
        Algorithm::parse(&self.algorithm).expect("validated algorithm")
    }

    pub fn env_params(&self) -> Result<EnvParams, ConfigError> {
        let env_err = |e: mfuav_core::env::EnvError| ConfigError::Schema(e.to_string());
        let geometry = Geometry::square(self.grid_rows, self.grid_cols, self.cell_side_m, self.altitude_m, self.gus_per_cell)
            .map_err(env_err)?;
        let mut energy = EnergyParams::default();
        energy.power_levels = self.power_levels_mw.iter().map(|p| p * 1e-3).collect();
        energy.circuit_power = self.circuit_power_w;
        energy.e_max = self.e_max_j;
        energy.e_min_alarm = self.e_min_j;
        energy.max_speed = self.max_speed_mps;
        energy.harvest.cloud_levels = self.cloud_levels_m.clone();
        let params = EnvParams {
            geometry,
            channel: ChannelParams::urban(self.altitude_m),
            energy,
            timing: SlotTiming { tau1: self.tau1_s, tau2: self.tau2_s },
            link: LinkParams { eta: db_to_linear(self.eta_db), bandwidth: self.bandwidth_hz, n0: dbm_to_watts(self.n0_dbm) },
            reward: RewardParams { sigma: self.sigma_per_j, xi: self.xi_per_j },
            demand: DemandChain::new(self.demand_p, self.demand_q).map_err(env_err)?,
            energy_levels: self.energy_levels,
        };
        params.validate().map_err(env_err)?;
        Ok(params)
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        let base = TrainerConfig {
            gamma: self.gamma,
            phi: self.phi,
            phi_end: self.phi_end,
            lr: self.learning_rate,
            hidden: self.hidden_layers.clone(),
            minibatch: self.minibatch,
            buffer_capacity: self.buffer_capacity,
            target_period: self.target_period,
            train_every: self.train_every,
            reward_scale: self.reward_scale,
            divergence_ratio: self.divergence_ratio,
            divergence_window: self.divergence_window,
            ..TrainerConfig::default()
        };
        let alg = Algorithm::parse(&self.algorithm).unwrap_or(Algorithm::MeMfdqn);
        mfuav_core::baselines::trainer_config(alg, &base, &self.baseline_config())
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            epsilon_start: self.epsilon_start,
            epsilon_end: self.epsilon_end,
            epsilon_fraction: self.epsilon_fraction,
            temperature_start: self.temperature_start,
            temperature_end: self.temperature_end,
        }
    }

    pub fn feature_mode(&self) -> FeatureMode {
        let mode = match self.meanfield_features {
            MeanFieldFeatures::Compact => FeatureMode::Compact,
            MeanFieldFeatures::Full => FeatureMode::Full,
        };
        mfuav_core::baselines::feature_mode(self.algorithm(), mode)
    }

    /// Output directory, resolved against the output-root variable when relative.
    pub fn resolved_output(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    if dir.is_absolute() {
        return dir.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir.to_path_buf(),
    }
}

fn parse_value(raw: &str) -> Value {
    let probe = format!("v = {raw}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text)
}
