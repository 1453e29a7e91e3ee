use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use btvc::app;
use btvc::config::RunConfig;
use btvc::Error;

/// Bayesian AR(1) with a latent time-varying intercept: fitting, long-run
/// regularized forecasts and yield-curve backtests.
#[derive(Parser)]
#[command(name = "btvc", version)]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic series or yield panel.
    Simulate,
    /// Run the sampler and write posterior draws.
    Fit,
    /// Simulate predictive paths from a draws file.
    Forecast {
        /// Draws file written by `fit` (default: <out>/draws.csv).
        #[arg(long)]
        draws: Option<PathBuf>,
    },
    /// Expanding-window out-of-sample comparison.
    Backtest {
        /// Model to include; repeat for several (default: the config list).
        #[arg(long = "model", value_name = "NAME")]
        models: Vec<String>,
    },
    /// Principal components of the yield panel.
    Pca,
    /// Print the effective configuration.
    ShowConfig,
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output.dir = o;
    }
    let out = cfg.output.dir.clone();
    let written = match cli.command {
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Simulate => app::cmd_simulate(&cfg, &out)?,
        Command::Fit => app::cmd_fit(&cfg, &out)?,
        Command::Forecast { draws } => app::cmd_forecast(&cfg, &out, draws.as_deref())?,
        Command::Backtest { models } => app::cmd_backtest(&cfg, &out, &models)?,
        Command::Pca => app::cmd_pca(&cfg, &out)?,
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let body = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{body}");
            ExitCode::from(code as u8)
        }
    }
}
