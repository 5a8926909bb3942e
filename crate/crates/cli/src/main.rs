use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use rlds_cli::{cmd_baseline, cmd_eval, cmd_import, cmd_train, load_config};

#[derive(Parser)]
#[command(name = "rlds", version, about = "Corridor-driving DQN agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an OSM XML extract into a road network file.
    Import {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        osm: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of spawn poses to sample.
        #[arg(long, default_value_t = 64)]
        spawns: usize,
    },
    /// Train an agent, writing the metrics CSV and checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Overrides `total_ticks`.
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a checkpoint greedily without training and print a JSON summary.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        ticks: u64,
    },
    /// Run the uniform random forward policy and print a JSON summary.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        ticks: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Import { common, osm, out, spawns } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            let file = cmd_import(&osm, &out, spawns, cfg.seed, &cfg.vehicle)?;
            eprintln!("wrote {} roads to {}", file.roads.len(), out.display());
        }
        Command::Train {
            common,
            ticks,
            metrics,
            checkpoint,
        } => {
            let mut cfg = load_config(common.config.as_deref(), common.seed)?;
            if let Some(t) = ticks {
                cfg.total_ticks = t;
            }
            if let Some(m) = metrics {
                cfg.output.metrics = m;
            }
            if let Some(c) = checkpoint {
                cfg.output.checkpoint = c;
            }
            let report = cmd_train(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Eval {
            common,
            checkpoint,
            ticks,
        } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            println!("{}", serde_json::to_string_pretty(&cmd_eval(&cfg, &checkpoint, ticks)?)?);
        }
        Command::Baseline { common, ticks } => {
            let cfg = load_config(common.config.as_deref(), common.seed)?;
            println!("{}", serde_json::to_string_pretty(&cmd_baseline(&cfg, ticks)?)?);
        }
    }
    Ok(())
}
