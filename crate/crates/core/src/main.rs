use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netload::cli;
use netload::config::RunConfig;
use netload::Result;

/// Direct and indirect net-load forecasting experiments.
#[derive(Parser)]
#[command(name = "netload", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for data generation, initialization, shuffling and dropout.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset CSV; synthetic data is generated when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// direct or indirect.
    #[arg(long)]
    method: Option<String>,
    /// fcnn or lstm.
    #[arg(long)]
    model: Option<String>,
    /// Any config key, e.g. `--set window.look_ahead=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV and its statistics.
    Generate(Common),
    /// Train the configured method and save checkpoints and loss curves.
    Train(Common),
    /// Score checkpoints from a training run's manifest.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train and score FCNN/LSTM × direct/indirect.
    Compare(Common),
    /// Retrain the configured method for several look-ahead horizons.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, ascending.
        #[arg(long)]
        horizons: Option<String>,
    },
}

fn resolve(c: &Common, extra: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("seed", c.seed.map(|s| s.to_string()));
    push("paths.out", c.out.as_ref().map(|p| p.display().to_string()));
    push("paths.data", c.data.as_ref().map(|p| p.display().to_string()));
    push("train.epochs", c.epochs.map(|e| e.to_string()));
    push("run.method", c.method.as_ref().map(|m| m.to_ascii_lowercase()));
    push("run.model", c.model.as_ref().map(|m| m.to_ascii_lowercase()));
    for s in &c.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| netload::Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    pairs.extend_from_slice(extra);
    cfg = cfg.apply_pairs(&pairs)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Generate(c) => cli::cmd_generate(&resolve(&c, &[])?),
        Command::Train(c) => {
            let (report, files) = cli::cmd_train(&resolve(&c, &[])?)?;
            let m = report.metrics;
            eprintln!("{}: MAPE {:.3}%  RMSPE {:.3}%  R2 {:.4}", report.label, m.mape, m.rmspe, m.r2);
            Ok(files)
        }
        Command::Evaluate { common, manifest } => {
            let (report, files) = cli::cmd_evaluate(&resolve(&common, &[])?, &manifest)?;
            let m = report.metrics;
            eprintln!("{}: MAPE {:.3}%  RMSPE {:.3}%  R2 {:.4}", report.label, m.mape, m.rmspe, m.r2);
            Ok(files)
        }
        Command::Compare(c) => {
            let (comparison, files) = cli::cmd_compare(&resolve(&c, &[])?)?;
            eprint!("{}", comparison.summary_csv());
            Ok(files)
        }
        Command::Sensitivity { common, horizons } => {
            let extra: Vec<_> = horizons.map(|h| ("sensitivity.horizons".to_string(), h)).into_iter().collect();
            let (rows, files) = cli::cmd_sensitivity(&resolve(&common, &extra)?)?;
            for r in rows {
                eprintln!("look-ahead {}: MAPE {:.3}%  RMSPE {:.3}%  R2 {:.4}", r.lookahead, r.mape, r.rmspe, r.cod);
            }
            Ok(files)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
