mod common;

use std::fs;

use mfuav_harness::plot::{emit_plot_data, FigureKind};
use mfuav_harness::robustness::{run_robustness, RobustnessRow, ROBUSTNESS_FILE};
use mfuav_harness::run::{
    config_hash, read_csv, read_manifest, ActionRow, MetricsRow, ACTIONS_FILE, CHECKPOINT_FILE, EQUILIBRIUM_FILE,
    MANIFEST_FILE, METRICS_FILE,
};
use mfuav_harness::sweep::{run_sweep, sweep_dirs};
use mfuav_harness::{run_experiment, HarnessError};

use common::tiny;

#[test]
fn run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(&tmp.path().join("r"));
    let summary = run_experiment(&cfg).unwrap();
    for f in [METRICS_FILE, EQUILIBRIUM_FILE, ACTIONS_FILE, CHECKPOINT_FILE, MANIFEST_FILE] {
        assert!(summary.dir.join(f).is_file(), "{f} missing");
    }
    let m = read_manifest(&summary.dir).unwrap();
    assert_eq!(m.config, cfg);
    assert_eq!(m.config_sha256, config_hash(&cfg));
    assert_eq!(m.status, "complete");
    assert_eq!(summary.train.len(), cfg.episodes);
    assert_eq!(summary.eval.len(), cfg.eval_episodes);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_experiment(&tiny(&tmp.path().join("a"))).unwrap();
    let b = run_experiment(&tiny(&tmp.path().join("b"))).unwrap();
    let from_manifest = {
        let mut cfg = read_manifest(&a.dir).unwrap().config;
        cfg.output_dir = tmp.path().join("c");
        run_experiment(&cfg).unwrap()
    };
    for f in [METRICS_FILE, EQUILIBRIUM_FILE, ACTIONS_FILE, CHECKPOINT_FILE] {
        let x = fs::read(a.dir.join(f)).unwrap();
        assert_eq!(x, fs::read(b.dir.join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(from_manifest.dir.join(f)).unwrap(), "{f} from manifest");
    }
}

#[test]
fn action_log_reproduces_policy_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(&tmp.path().join("r"));
    let summary = run_experiment(&cfg).unwrap();
    let actions: Vec<ActionRow> = read_csv(&summary.dir.join(ACTIONS_FILE)).unwrap();
    let metrics: Vec<MetricsRow> = read_csv(&summary.dir.join(METRICS_FILE)).unwrap();
    let eval: Vec<&MetricsRow> = metrics.iter().filter(|r| r.phase == "eval").collect();
    assert_eq!(actions.len(), cfg.eval_episodes * cfg.eval_steps);
    for row in eval {
        let slots: Vec<&ActionRow> = actions.iter().filter(|a| a.episode == row.episode).collect();
        let n = slots.len() as f64;
        let flew = slots.iter().filter(|a| a.hover != a.prev_hover).count() as f64 / n;
        let power = slots.iter().map(|a| a.power_mw).sum::<f64>() / n;
        assert!((flew - row.flying_probability).abs() < 1e-12, "episode {}", row.episode);
        assert!((power - row.mean_power_mw).abs() < 1e-9, "episode {}", row.episode);
    }
}

#[test]
fn sweep_writes_one_directory_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(&tmp.path().join("s"));
    cfg.sweep_q = vec![0.3, 0.9];
    cfg.sweep_seed = vec![0, 1];
    let dirs = sweep_dirs(&cfg);
    assert_eq!(dirs.len(), 4);
    let results = run_sweep(&cfg).unwrap();
    assert_eq!(results.len(), 4);
    for d in &dirs {
        assert!(d.join(METRICS_FILE).is_file(), "{}", d.display());
    }
    assert_eq!(read_manifest(&dirs[3]).unwrap().config.demand_q, 0.9);
    assert_eq!(read_manifest(&dirs[3]).unwrap().config.seed, 1);
    let table = emit_plot_data(&dirs, FigureKind::PolicyVsQ, &tmp.path().join("plots")).unwrap();
    let text = fs::read_to_string(table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,flying_probability,mean_power_mW"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn no_removal_leaves_evaluation_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(&tmp.path().join("r"));
    let summary = run_robustness(&cfg).unwrap();
    let rows: Vec<RobustnessRow> = read_csv(&cfg.output_dir.join(ROBUSTNESS_FILE)).unwrap();
    assert_eq!(rows.len(), cfg.robustness_episodes);
    assert!(rows.iter().all(|r| r.active_uavs == 9));
    assert!(summary.before_mean_reward.is_finite());
    assert_eq!(summary.removal_count, 0);
    // Same policy, same episode seeds: removal of nothing reproduces itself.
    let again = run_robustness(&tiny(&tmp.path().join("r2"))).unwrap();
    assert_eq!(summary, again);
}

#[test]
fn removing_everyone_else_leaves_one_uav() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(&tmp.path().join("r"));
    cfg.removal_count = 8;
    run_robustness(&cfg).unwrap();
    let rows: Vec<RobustnessRow> = read_csv(&cfg.output_dir.join(ROBUSTNESS_FILE)).unwrap();
    let (before, after) = rows.split_at(cfg.removal_episode);
    assert!(before.iter().all(|r| r.active_uavs == 9));
    assert!(after.iter().all(|r| r.active_uavs == 1));
}

#[test]
fn plotdata_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("plots");
    let algorithms = ["ME-MFDQN", "BOLTZ-MFDQN", "EG-MFDQN", "EG-IDQN"];
    let mut cfg = tiny(&tmp.path().join("alg"));
    cfg.sweep_algorithm = algorithms.iter().map(|s| s.to_string()).collect();
    run_sweep(&cfg).unwrap();
    let dirs = sweep_dirs(&cfg);
    let text = fs::read_to_string(emit_plot_data(&dirs, FigureKind::Algorithms, &out).unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algorithm,episode,mean_reward"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4 * cfg.episodes);
    for a in algorithms {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{a},"))).count(), cfg.episodes);
    }

    let empty = tmp.path().join("empty");
    assert!(matches!(emit_plot_data(&[], FigureKind::Algorithms, &empty), Err(HarnessError::Plot(_))));
    assert!(!empty.exists());

    let mut other = tiny(&tmp.path().join("q9"));
    other.demand_q = 0.9;
    run_experiment(&other).unwrap();
    let mixed = vec![dirs[0].clone(), other.output_dir.clone()];
    match emit_plot_data(&mixed, FigureKind::Algorithms, &out) {
        Err(HarnessError::Plot(msg)) => assert!(msg.contains("mismatched sweep axes"), "{msg}"),
        other => panic!("expected a plot error, got {other:?}"),
    }
}
