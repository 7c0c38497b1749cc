use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use masslam::experiments::{run_experiment_with, write_report, ExperimentConfig, ExperimentReport, PolicyKind};
use masslam::rl::checkpoint;
use masslam::{Error, Result};

#[derive(Parser)]
#[command(name = "masslam", version, about = "Multi-agent SLAM coordination experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate only this policy.
    #[arg(long)]
    policy: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of evaluation episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Number of training episodes.
    #[arg(long)]
    train_episodes: Option<usize>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train (if needed) and evaluate at the configured sigma1.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate across several sigma1 values; the DQN is trained once at the configured sigma1.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        sigma1: Vec<f64>,
        /// Use this trained network instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate a saved network against the other configured policies.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sigma1: Vec<f64>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &c.policy {
        cfg.policies = vec![p.parse::<PolicyKind>()?];
    }
    if let Some(out) = &c.out {
        cfg.output = out.clone();
    }
    if let Some(e) = c.episodes {
        cfg.eval_episodes = e;
    }
    if let Some(e) = c.train_episodes {
        cfg.train_episodes = e;
    }
    if let Some(t) = c.ticks {
        cfg.ticks = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(c: &Common, sigmas: Option<Vec<f64>>, checkpoint_path: Option<&Path>) -> Result<()> {
    let cfg = load_config(c)?;
    let sigmas = sigmas.filter(|s| !s.is_empty()).unwrap_or_else(|| vec![cfg.sigma1]);
    let pretrained = match checkpoint_path {
        Some(p) => Some(checkpoint::load(p, cfg.agents, cfg.sim.frames)?),
        None => None,
    };
    let quiet = c.quiet;
    let report = run_experiment_with(&cfg, &sigmas, pretrained, |e, rmse| {
        if !quiet && (e + 1) % 10 == 0 {
            eprintln!("training episode {:>4}: transition RMSE {rmse:.4} m", e + 1);
        }
    })?;
    std::fs::create_dir_all(&cfg.output)?;
    let summary = write_report(&cfg.output, &report, cfg.agents, cfg.plots)?;
    std::fs::write(cfg.output.join("config.toml"), cfg.to_toml()?)?;
    if let Some(training) = &report.training {
        checkpoint::save(&cfg.output.join("checkpoint.bin"), &training.network, cfg.sim.frames)?;
    }
    if !quiet {
        print_table(&report);
        eprintln!("wrote {}", summary.display());
    }
    Ok(())
}

fn print_table(report: &ExperimentReport) {
    println!(
        "{:<8} {:>6} {:>14} {:>16} {:>12} {:>7} {:>7}",
        "policy", "sigma1", "trans_rmse_m", "orient_rmse_deg", "utility", "wait", "assist"
    );
    for r in &report.summary {
        println!(
            "{:<8} {:>6.2} {:>8.4}±{:<5.4} {:>9.3}±{:<6.3} {:>12.4} {:>7.3} {:>7.3}",
            r.policy.as_str(),
            r.sigma1,
            r.trans_rmse_m,
            r.trans_std,
            r.orient_rmse_deg,
            r.orient_std,
            r.mean_utility,
            r.wait_fraction,
            r.assist_fraction
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common } => execute(common, None, None),
        Command::Sweep { common, sigma1, checkpoint } => execute(common, Some(sigma1.clone()), checkpoint.as_deref()),
        Command::Eval { common, checkpoint, sigma1 } => execute(common, Some(sigma1.clone()), Some(checkpoint)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidConfiguration(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
