//! Command-line entry point. Config keys can be overridden with trailing
//! `--key=value` or `--key value` pairs using the config's own key names.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfuav_harness::config::{load_config, ExperimentConfig};
use mfuav_harness::error::{ConfigError, HarnessError};
use mfuav_harness::plot::{emit_plot_data, FigureKind};
use mfuav_harness::robustness::run_robustness;
use mfuav_harness::run::{read_manifest, run_experiment};
use mfuav_harness::sweep::run_sweep;

#[derive(Parser)]
#[command(name = "mfuav", version, about = "UAV mean-field game experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML config file, or a run directory holding a manifest. Omit for defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides of config keys, e.g. `--demand_q=0.9 --grid_rows 5`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate and write one run directory.
    Run(ConfigArgs),
    /// One run per point of the sweep axes.
    Sweep(ConfigArgs),
    /// Train, then evaluate the whole population with agent removal.
    Robustness(ConfigArgs),
    /// Emit a figure table from finished run directories.
    Plotdata {
        /// fig4 .. fig12
        #[arg(long)]
        kind: String,
        /// Directory the table is written to.
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        runs: Vec<PathBuf>,
    },
    /// Parse and validate a config, printing the fully resolved result.
    ValidateConfig(ConfigArgs),
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            return Err(ConfigError::Schema(format!("expected `--key=value`, got `{arg}`")));
        };
        match body.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| ConfigError::Schema(format!("missing value for `--{body}`")))?;
                out.push((body.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig, HarnessError> {
    let base = match &args.config {
        None => ExperimentConfig::from_toml_str("")?,
        Some(p) if p.is_dir() => read_manifest(p)?.config,
        Some(p) => load_config(p)?,
    };
    Ok(base.with_overrides(&parse_overrides(&args.overrides)?)?)
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(a) => {
            let s = run_experiment(&resolve(&a)?)?;
            println!(
                "{}: converged={} iterations={} final_reward={:.3} eval_ee={:.3}",
                s.dir.display(),
                s.converged,
                s.iterations,
                s.final_reward(50),
                s.eval_mean(|r| r.mean_ee)
            );
        }
        Command::Sweep(a) => {
            for s in run_sweep(&resolve(&a)?)? {
                println!("{}: converged={} final_reward={:.3}", s.dir.display(), s.converged, s.final_reward(50));
            }
        }
        Command::Robustness(a) => {
            let s = run_robustness(&resolve(&a)?)?;
            println!(
                "removed {} at episode {}: before={:.3} after={:.3} relative_change={:.4}",
                s.removal_count, s.removal_episode, s.before_mean_reward, s.after_mean_reward, s.relative_change
            );
        }
        Command::Plotdata { kind, out, runs } => {
            let k = FigureKind::parse(&kind).ok_or_else(|| HarnessError::Plot(format!("unknown figure kind `{kind}`")))?;
            let out = mfuav_harness::config::resolve_output(&out);
            println!("{}", emit_plot_data(&runs, k, &out)?.display());
        }
        Command::ValidateConfig(a) => print!("{}", resolve(&a)?.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
