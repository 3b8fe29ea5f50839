//! Tidy CSV tables for each figure kind, built from finished run
//! directories. Seeds are averaged; every other config key must agree
//! across runs except the axes of the figure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Observation};
use crate::error::HarnessError;
use crate::robustness::{RobustnessRow, ROBUSTNESS_FILE};
use crate::run::{read_csv, read_manifest, MetricsRow, METRICS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Training reward per episode for each algorithm.
    Algorithms,
    /// Active-UAV reward per evaluation episode under removal.
    Robustness,
    PolicyVsQ,
    EeVsQEta,
    PolicyVsSigma,
    EeVsSigmaEta,
    ObservabilityReward,
    ObservabilityPolicy,
    ObservabilityEe,
}

impl FigureKind {
    pub const ALL: [FigureKind; 9] = [
        FigureKind::Algorithms,
        FigureKind::Robustness,
        FigureKind::PolicyVsQ,
        FigureKind::EeVsQEta,
        FigureKind::PolicyVsSigma,
        FigureKind::EeVsSigmaEta,
        FigureKind::ObservabilityReward,
        FigureKind::ObservabilityPolicy,
        FigureKind::ObservabilityEe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FigureKind::Algorithms => "fig4",
            FigureKind::Robustness => "fig5",
            FigureKind::PolicyVsQ => "fig6",
            FigureKind::EeVsQEta => "fig7",
            FigureKind::PolicyVsSigma => "fig8",
            FigureKind::EeVsSigmaEta => "fig9",
            FigureKind::ObservabilityReward => "fig10",
            FigureKind::ObservabilityPolicy => "fig11",
            FigureKind::ObservabilityEe => "fig12",
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            FigureKind::Algorithms => "fig4_algorithms.csv",
            FigureKind::Robustness => "fig5_robustness.csv",
            FigureKind::PolicyVsQ => "fig6_policy_vs_q.csv",
            FigureKind::EeVsQEta => "fig7_ee_vs_q_eta.csv",
            FigureKind::PolicyVsSigma => "fig8_policy_vs_sigma.csv",
            FigureKind::EeVsSigmaEta => "fig9_ee_vs_sigma_eta.csv",
            FigureKind::ObservabilityReward => "fig10_observability_reward.csv",
            FigureKind::ObservabilityPolicy => "fig11_observability_policy.csv",
            FigureKind::ObservabilityEe => "fig12_observability_ee.csv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    /// Config keys allowed to differ between the runs of one table.
    fn axes(&self) -> &'static [&'static str] {
        match self {
            FigureKind::Algorithms => &["algorithm"],
            FigureKind::Robustness => &["removal_count"],
            FigureKind::PolicyVsQ => &["demand_q"],
            FigureKind::EeVsQEta => &["demand_q", "eta_db"],
            FigureKind::PolicyVsSigma => &["sigma_per_j"],
            FigureKind::EeVsSigmaEta => &["sigma_per_j", "eta_db"],
            FigureKind::ObservabilityReward => &["coverage", "observation"],
            FigureKind::ObservabilityPolicy | FigureKind::ObservabilityEe => &["coverage", "observation", "demand_q"],
        }
    }
}

/// Keys that never make runs incomparable.
const FREE_KEYS: &[&str] = &[
    "seed",
    "output_dir",
    "jobs",
    "sweep_q",
    "sweep_sigma_per_j",
    "sweep_eta_db",
    "sweep_coverage",
    "sweep_algorithm",
    "sweep_seed",
];

struct Run {
    config: ExperimentConfig,
    dir: PathBuf,
}

impl Run {
    fn metrics(&self) -> Result<Vec<MetricsRow>, HarnessError> {
        read_csv(&self.dir.join(METRICS_FILE))
    }

    fn phase(&self, phase: &str) -> Result<Vec<MetricsRow>, HarnessError> {
        Ok(self.metrics()?.into_iter().filter(|r| r.phase == phase).collect())
    }

    /// Effective coverage: fully observable runs count as 1.
    fn coverage(&self) -> f64 {
        match self.config.observation {
            Observation::Full => 1.0,
            Observation::Partial => self.config.coverage,
        }
    }
}

fn check_axes(kind: FigureKind, runs: &[Run]) -> Result<(), HarnessError> {
    let first = runs[0].config.to_table();
    for run in &runs[1..] {
        let t = run.config.to_table();
        for (k, v) in &first {
            if FREE_KEYS.contains(&k.as_str()) || kind.axes().contains(&k.as_str()) {
                continue;
            }
            if t.get(k) != Some(v) {
                return Err(HarnessError::Plot(format!(
                    "mismatched sweep axes: `{k}` differs between {} and {}",
                    runs[0].dir.display(),
                    run.dir.display()
                )));
            }
        }
    }
    Ok(())
}

/// Group key of a run, rendered exactly as it appears in the table.
fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Seed-averaged evaluation statistics grouped by numeric axes.
fn eval_table(
    runs: &[Run],
    axes: impl Fn(&Run) -> Vec<f64>,
    stats: impl Fn(&[MetricsRow]) -> Vec<f64>,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, Vec<Vec<f64>>)> = BTreeMap::new();
    for run in runs {
        let a = axes(run);
        let s = stats(&run.phase("eval")?);
        groups.entry(key(&a)).or_insert_with(|| (a.clone(), Vec::new())).1.push(s);
    }
    let mut rows: Vec<Vec<f64>> = groups
        .into_values()
        .map(|(a, samples)| {
            let width = samples[0].len();
            let means: Vec<f64> = (0..width).map(|i| mean(&samples.iter().map(|s| s[i]).collect::<Vec<_>>())).collect();
            [a, means].concat()
        })
        .collect();
    rows.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(rows)
}

fn eval_policy(rows: &[MetricsRow]) -> Vec<f64> {
    vec![mean(&rows.iter().map(|r| r.flying_probability).collect::<Vec<_>>()), mean(&rows.iter().map(|r| r.mean_power_mw).collect::<Vec<_>>())]
}

fn eval_ee(rows: &[MetricsRow]) -> Vec<f64> {
    vec![mean(&rows.iter().map(|r| r.mean_ee).collect::<Vec<_>>())]
}

/// Seed-averaged per-episode curve for each label.
fn curves<L: Ord + Clone>(
    runs: &[Run],
    label: impl Fn(&Run) -> L,
    series: impl Fn(&Run) -> Result<Vec<(usize, Vec<f64>)>, HarnessError>,
) -> Result<Vec<(L, usize, Vec<f64>)>, HarnessError> {
    let mut acc: BTreeMap<(L, usize), Vec<Vec<f64>>> = BTreeMap::new();
    for run in runs {
        for (episode, values) in series(run)? {
            acc.entry((label(run), episode)).or_default().push(values);
        }
    }
    Ok(acc
        .into_iter()
        .map(|((l, e), samples)| {
            let width = samples[0].len();
            (l, e, (0..width).map(|i| mean(&samples.iter().map(|s| s[i]).collect::<Vec<_>>())).collect())
        })
        .collect())
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

/// Write the table for `kind` into `out_dir` and return its path.
pub fn emit_plot_data(run_dirs: &[PathBuf], kind: FigureKind, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    if run_dirs.is_empty() {
        return Err(HarnessError::Plot("no run directories given".into()));
    }
    let runs = run_dirs
        .iter()
        .map(|d| Ok(Run { config: read_manifest(d)?.config, dir: d.clone() }))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    check_axes(kind, &runs)?;
    let train_rewards = |run: &Run| -> Result<Vec<(usize, Vec<f64>)>, HarnessError> {
        Ok(run.phase("train")?.into_iter().map(|r| (r.episode, vec![r.mean_reward])).collect())
    };
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match kind {
        FigureKind::Algorithms => {
            let c = curves(&runs, |r| r.config.algorithm.clone(), train_rewards)?;
            (vec!["algorithm", "episode", "mean_reward"], c.into_iter().map(|(l, e, v)| [vec![l, e.to_string()], fmt(&v)].concat()).collect())
        }
        FigureKind::Robustness => {
            let c = curves(&runs, |r| r.config.removal_count, |run| {
                let rows: Vec<RobustnessRow> = read_csv(&run.dir.join(ROBUSTNESS_FILE))?;
                Ok(rows.into_iter().map(|r| (r.episode, vec![r.mean_reward, r.active_uavs as f64])).collect())
            })?;
            (
                vec!["removal_count", "episode", "mean_reward", "active_uavs"],
                c.into_iter().map(|(l, e, v)| [vec![l.to_string(), e.to_string()], fmt(&v)].concat()).collect(),
            )
        }
        FigureKind::PolicyVsQ => (
            vec!["q", "flying_probability", "mean_power_mW"],
            eval_table(&runs, |r| vec![r.config.demand_q], eval_policy)?.iter().map(|r| fmt(r)).collect(),
        ),
        FigureKind::EeVsQEta => (
            vec!["q", "eta_db", "energy_efficiency"],
            eval_table(&runs, |r| vec![r.config.demand_q, r.config.eta_db], eval_ee)?.iter().map(|r| fmt(r)).collect(),
        ),
        FigureKind::PolicyVsSigma => (
            vec!["sigma", "flying_probability", "mean_power_mW"],
            eval_table(&runs, |r| vec![r.config.sigma_per_j], eval_policy)?.iter().map(|r| fmt(r)).collect(),
        ),
        FigureKind::EeVsSigmaEta => (
            vec!["sigma", "eta_db", "energy_efficiency"],
            eval_table(&runs, |r| vec![r.config.sigma_per_j, r.config.eta_db], eval_ee)?.iter().map(|r| fmt(r)).collect(),
        ),
        FigureKind::ObservabilityReward => {
            let c = curves(&runs, |r| r.coverage().to_bits(), train_rewards)?;
            (
                vec!["coverage", "episode", "mean_reward"],
                c.into_iter().map(|(l, e, v)| [vec![f64::from_bits(l).to_string(), e.to_string()], fmt(&v)].concat()).collect(),
            )
        }
        FigureKind::ObservabilityPolicy => (
            vec!["coverage", "q", "flying_probability", "mean_power_mW"],
            eval_table(&runs, |r| vec![r.coverage(), r.config.demand_q], eval_policy)?.iter().map(|r| fmt(r)).collect(),
        ),
        FigureKind::ObservabilityEe => (
            vec!["coverage", "q", "energy_efficiency"],
            eval_table(&runs, |r| vec![r.coverage(), r.config.demand_q], eval_ee)?.iter().map(|r| fmt(r)).collect(),
        ),
    };
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(kind.file_name());
    write_table(&path, &header, rows)?;
    Ok(path)
}
