//! Command-line entry point: one flat config file plus a seed drives data
//! generation, pre-training, high-level training, backtesting, and report
//! merging. Exit codes: 0 ok, 2 config error, 3 data error, 4 training
//! divergence, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hiertrade::config::RunConfig;
use hiertrade::eval::render_table;
use hiertrade::pipeline;
use hiertrade::Error;

#[derive(Parser)]
#[command(name = "hiertrade", version, about = "Two-level trading engine: portfolio policy over simulated order-book execution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Flat key = value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> hiertrade::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
            config.synthetic.seed = hiertrade::seed::split(seed, "synthetic");
        }
        if let Some(out) = &self.out {
            config.out_dir = out.display().to_string();
        }
        if let Some(jobs) = self.jobs {
            config.jobs = jobs;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the run's market data as OHLCV and book CSV files.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train one execution policy per (asset, direction) and freeze the bank.
    Pretrain {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the portfolio policy on top of the frozen bank.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Backtest strategies and write reports.
    Backtest {
        #[command(flatten)]
        common: CommonArgs,
        /// Strategy name, comma list, or "all".
        #[arg(long, default_value = "all")]
        strategy: String,
        /// Run baselines through the book simulator instead of ideal fills.
        #[arg(long)]
        simulated_baselines: bool,
    },
    /// Merge every report under a run directory into one table.
    Report {
        /// Run directory (the out_dir of earlier commands).
        run_dir: PathBuf,
    },
}

fn run(cli: Cli) -> hiertrade::Result<()> {
    match cli.command {
        Command::GenData { common } => {
            let config = common.load()?;
            let written = pipeline::cmd_gen_data(&config)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::Pretrain { common } => {
            let config = common.load()?;
            let (bank, reports) = pipeline::cmd_pretrain(&config)?;
            println!("banked {} policies under {}/bank", bank.len(), config.out_dir);
            for r in reports {
                let flag = if r.flagged { "  [worse than market order]" } else { "" };
                println!(
                    "  {} {}: {} episodes, eval cost {:.4} vs baseline {:.4}{flag}",
                    r.asset,
                    r.direction.label(),
                    r.episodes,
                    r.eval_cost,
                    r.baseline_cost
                );
            }
        }
        Command::Train { common } => {
            let config = common.load()?;
            let result = pipeline::cmd_train(&config)?;
            println!(
                "trained {} epochs; best evaluation return {:.6}; checkpoint at {}/high.ckpt",
                result.curve.len(),
                result.best_eval_return,
                config.out_dir
            );
        }
        Command::Backtest { common, strategy, simulated_baselines } => {
            let config = common.load()?;
            let rows = pipeline::cmd_backtest(&config, &strategy, !simulated_baselines)?;
            print!("{}", render_table(&rows));
            println!("reports under {}/reports", config.out_dir);
        }
        Command::Report { run_dir } => {
            let (_, text) = pipeline::cmd_report(&run_dir)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Data(_) | Error::EmptyInput(_) | Error::Stream(_) | Error::Io(_) => 3,
        Error::Divergence(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
