//! Sweeps: one independent run per point of the product of the sweep axes.

use std::path::PathBuf;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::run::{run_experiment, RunSummary};

/// One sweep point: its directory name and configuration.
pub fn sweep_points(base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let mut single = base.clone();
    single.sweep_q.clear();
    single.sweep_sigma_per_j.clear();
    single.sweep_eta_db.clear();
    single.sweep_coverage.clear();
    single.sweep_algorithm.clear();
    single.sweep_seed.clear();
    let mut points = vec![(Vec::<String>::new(), single)];
    fn expand<T: Clone + std::fmt::Display>(
        points: Vec<(Vec<String>, ExperimentConfig)>,
        values: &[T],
        name: &str,
        set: impl Fn(&mut ExperimentConfig, T),
    ) -> Vec<(Vec<String>, ExperimentConfig)> {
        if values.is_empty() {
            return points;
        }
        let mut out = Vec::with_capacity(points.len() * values.len());
        for (parts, cfg) in points {
            for v in values {
                let mut c = cfg.clone();
                set(&mut c, v.clone());
                let mut p = parts.clone();
                p.push(format!("{name}{v}"));
                out.push((p, c));
            }
        }
        out
    }
    points = expand(points, &base.sweep_algorithm, "", |c, v| c.algorithm = v);
    points = expand(points, &base.sweep_q, "q", |c, v| c.demand_q = v);
    points = expand(points, &base.sweep_sigma_per_j, "sigma", |c, v| c.sigma_per_j = v);
    points = expand(points, &base.sweep_eta_db, "eta", |c, v| c.eta_db = v);
    points = expand(points, &base.sweep_coverage, "cov", |c, v| c.coverage = v);
    points = expand(points, &base.sweep_seed, "seed", |c, v| c.seed = v);
    points
        .into_iter()
        .map(|(parts, mut cfg)| {
            let name = if parts.is_empty() { "run".to_string() } else { parts.join("_") };
            cfg.output_dir = base.output_dir.join(&name);
            (name, cfg)
        })
        .collect()
}

/// Run every sweep point, `jobs` at a time on scoped threads. Points share
/// no state.
pub fn run_sweep(base: &ExperimentConfig) -> Result<Vec<RunSummary>, HarnessError> {
    let points = sweep_points(base);
    for (_, cfg) in &points {
        cfg.validate()?;
    }
    let mut results: Vec<Option<Result<RunSummary, HarnessError>>> = (0..points.len()).map(|_| None).collect();
    for (chunk_points, chunk_results) in points.chunks(base.jobs).zip(results.chunks_mut(base.jobs)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_points.iter().map(|(_, cfg)| s.spawn(move || run_experiment(cfg))).collect();
            for (h, slot) in handles.into_iter().zip(chunk_results.iter_mut()) {
                *slot = Some(h.join().unwrap_or_else(|_| Err(HarnessError::Training("worker panicked".into()))));
            }
        });
    }
    results.into_iter().map(|r| r.expect("every point ran")).collect()
}

/// Output directories a sweep writes, in run order.
pub fn sweep_dirs(base: &ExperimentConfig) -> Vec<PathBuf> {
    sweep_points(base).into_iter().map(|(_, c)| c.resolved_output()).collect()
}
