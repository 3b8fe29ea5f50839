#![allow(dead_code)]

use std::path::Path;

use mfuav_harness::ExperimentConfig;

/// A 3x3 grid with a handful of short episodes; a run takes well under a second.
pub const TINY: &str = r#"
scale = "desk"
grid_rows = 3
grid_cols = 3
episodes = 4
steps = 20
outer_iterations = 2
minibatch = 16
train_every = 2
rollout_slots = 10
rollout_averaged = 5
eval_episodes = 2
eval_steps = 20
robustness_episodes = 4
robustness_steps = 10
removal_episode = 2
"#;

pub fn tiny(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml_str(TINY).unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}
