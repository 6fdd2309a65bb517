//! `pdm`: runs one predictive-maintenance experiment per output directory.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Format, RunContext, SurfaceArgs};
use config::UsageError;
use pdm_core::tuner::Objective;

#[derive(Debug, Parser)]
#[command(name = "pdm", version, about = "Cost-sensitive model selection for predictive maintenance")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Format of report outputs.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate fleet.csv and events.csv.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Window the event logs into dataset.csv and test_dataset.csv.
    Features {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        fleet: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Grid-search the forest and cutoff; writes model.json and tune_trace.csv.
    Tune {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Training dataset (default: <output_dir>/dataset.csv).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Overrides `objective` from the config.
        #[arg(long, value_parser = parse_objective)]
        objective: Option<Objective>,
    },
    /// Score a dataset and write the cost report.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset to score (default: <output_dir>/test_dataset.csv).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Cutoff (default: the one stored by `tune`).
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// ROC curve plus iso-savings lines.
    Roc {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        cutoff: Option<f64>,
        /// Points sampled along each iso-savings line.
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// F1 and savings over a lattice of (TP, FP).
    Surface {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Positives; with --n, replaces the counts read from the dataset.
        #[arg(long)]
        p: Option<u64>,
        #[arg(long)]
        n: Option<u64>,
        /// Overrides the TP coefficient derived from the cost model.
        #[arg(long)]
        a: Option<f64>,
        /// Overrides the FP penalty derived from the cost model.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Compare F1 and savings tuning over several (gap, prediction) intervals.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Scale weekly savings to a period and fleet size.
    Project {
        #[arg(long, allow_negative_numbers = true)]
        weekly: f64,
        #[arg(long, default_value_t = 1.0)]
        weeks: f64,
        /// Fleet size relative to the one the weekly figure came from.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "f1" => Ok(Objective::F1),
        "savings" => Ok(Objective::Savings),
        _ => Err(format!("unknown objective `{s}` (expected f1 or savings)")),
    }
}

fn context(cfg: &ConfigArgs, format: Format) -> Result<RunContext> {
    let (config, config_bytes) = config::load(&cfg.config)?;
    let out = config::output_dir(&config, cfg.output_dir.as_ref());
    std::fs::create_dir_all(&out).map_err(|e| anyhow::anyhow!("creating {}: {e}", out.display()))?;
    Ok(RunContext {
        config,
        config_bytes,
        out,
        format,
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let f = cli.format;
    match &cli.command {
        Command::Simulate { cfg } => commands::simulate(&context(cfg, f)?),
        Command::Features { cfg, fleet, events } => {
            commands::features(&context(cfg, f)?, fleet.as_ref(), events.as_ref())
        }
        Command::Tune {
            cfg,
            dataset,
            objective,
        } => commands::tune(&context(cfg, f)?, dataset.as_ref(), *objective),
        Command::Evaluate {
            cfg,
            model,
            dataset,
            cutoff,
        } => commands::evaluate(&context(cfg, f)?, model.as_ref(), dataset.as_ref(), *cutoff),
        Command::Roc {
            cfg,
            model,
            dataset,
            cutoff,
            samples,
        } => commands::roc(&context(cfg, f)?, model.as_ref(), dataset.as_ref(), *cutoff, *samples),
        Command::Surface { cfg, p, n, a, b, dataset } => commands::surface(
            &context(cfg, f)?,
            &SurfaceArgs {
                p: *p,
                n: *n,
                a: *a,
                b: *b,
                dataset: dataset.clone(),
            },
        ),
        Command::Sweep { cfg } => commands::sweep(&context(cfg, f)?),
        Command::Project { weekly, weeks, scale } => commands::project(*weekly, *weeks, *scale, f),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = matches!(
                e.downcast_ref::<pdm_core::Error>(),
                Some(pdm_core::Error::Config(_) | pdm_core::Error::Horizon { .. })
            );
            if config_error || e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
