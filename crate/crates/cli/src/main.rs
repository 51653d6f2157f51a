//! `dem-sim`: runs the marketplace scenarios from the command line.
//!
//! Subcommands mirror the two experiments plus a standalone gas sweep:
//! `e2e` replays the full protocol for one user count, `train` runs the
//! federated/local training comparison, and `gas-report` sweeps 2/10/50
//! users and writes the combined per-op gas table.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use dem_core::runner::{
    self, report, ScenarioConfig, TrainMode,
};

#[derive(Parser)]
#[command(name = "dem-sim", about = "Decentralized energy marketplace simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Federated,
    Local,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> TrainMode {
        match m {
            ModeArg::Federated => TrainMode::Federated,
            ModeArg::Local => TrainMode::Local,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Replay the end-to-end protocol and write gas/settlement reports.
    E2e {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the configured household count.
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one SAC agent per household and write reward curves.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep 2, 10 and 50 users and write the combined gas table.
    GasReport {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::E2e {
            config,
            users,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(u) = users {
                cfg.households = u;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            cfg.validate()?;
            let outcome = runner::run_e2e(&cfg)?;
            let rows: Vec<_> = outcome
                .ledger
                .gas_report(None)
                .into_iter()
                .map(|r| runner::GasUsageRow {
                    op: r.op,
                    users: cfg.households,
                    mean_gas: r.mean_gas,
                    max_gas: r.max_gas,
                })
                .collect();
            report::write_gas_csv(&cfg.out_dir.join("gas_usage.csv"), &rows)?;
            report::write_settlements_csv(
                &cfg.out_dir.join("settlements.csv"),
                &outcome.settlements,
            )?;
            report::write_pool_csv(&cfg.out_dir.join("pool.csv"), &outcome.pool_series)?;
            let events = std::fs::File::create(cfg.out_dir.join("events.jsonl"))?;
            outcome.ledger.export_events_jsonl(std::io::BufWriter::new(events))?;
            println!(
                "e2e: {} settlements over {} slots, total forfeit {}",
                outcome.settlements.len(),
                cfg.slots,
                outcome.forfeit_total
            );
        }
        Command::Train {
            config,
            mode,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            cfg.validate()?;
            let mode: TrainMode = mode.into();
            let outcome = runner::run_training(&cfg, mode)?;
            report::write_rewards_csv(
                &cfg.out_dir.join("rewards.csv"),
                &outcome.rewards,
                mode,
                cfg.seed,
            )?;
            report::write_metrics_csv(&cfg.out_dir.join("metrics.csv"), &outcome.rewards)?;
            report::write_federation_csv(&cfg.out_dir.join("federation.csv"), &outcome.drift)?;
            let final_mean: f64 = {
                let tail = outcome
                    .rewards
                    .iter()
                    .filter(|r| r.episode >= cfg.episodes.saturating_sub((cfg.episodes / 5).max(1)))
                    .map(|r| r.reward)
                    .collect::<Vec<_>>();
                tail.iter().sum::<f64>() / tail.len().max(1) as f64
            };
            println!(
                "train[{}]: {} households x {} episodes, final-20% mean reward {:.4}",
                mode.label(),
                cfg.households,
                cfg.episodes,
                final_mean
            );
        }
        Command::GasReport { config, out } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            let rows = runner::run_gas_experiment(&cfg, &[2, 10, 50])?;
            report::write_gas_csv(&out.join("gas_usage.csv"), &rows)?;
            let max = rows.iter().map(|r| r.max_gas).max().unwrap_or(0);
            println!("gas-report: {} rows, max gas {}", rows.len(), max);
        }
    }
    Ok(())
}
