use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use betaops::experiment::{cmd_attack, cmd_report, cmd_simulate, cmd_sweep, ExperimentConfig};

/// Differentially private estimation by βD-Bayes one-posterior sampling.
#[derive(Parser, Debug)]
#[command(name = "betaops", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a dataset (first task, n, d and seed of the config) and write it as CSV.
    Simulate(Common),
    /// Run every (mechanism, n, d, ε, seed) cell and write JSON lines.
    Sweep(Common),
    /// Run membership-inference audits per (mechanism, ε, seed) and write JSON lines.
    Attack(Common),
    /// Summarize a results file into medians, IQRs and plot series.
    Report {
        /// JSON-lines results from `sweep` or `attack`.
        input: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides `workers` in the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Release even when sampler diagnostics fail; each such release records a caveat.
    #[arg(long)]
    force_release: bool,
}

impl Common {
    fn resolve(&self, default_out: &str) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            if w == 0 {
                bail!("--workers must be positive");
            }
            cfg.workers = Some(w);
        }
        if self.force_release {
            cfg.force_release = true;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from(default_out));
        cfg.validate()?;
        Ok((cfg, out))
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(c) => {
            let (cfg, out) = c.resolve("data.csv")?;
            let (data, _) = cmd_simulate(&cfg, &out)?;
            eprintln!("wrote {} records to {}", data.len(), out.display());
        }
        Command::Sweep(c) => {
            let (cfg, out) = c.resolve("results.jsonl")?;
            let records = cmd_sweep(&cfg, &out)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            eprintln!("wrote {} records ({failed} failed) to {}", records.len(), out.display());
        }
        Command::Attack(c) => {
            let (cfg, out) = c.resolve("attack.jsonl")?;
            let records = cmd_attack(&cfg, &out)?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            eprintln!("wrote {} records ({failed} failed) to {}", records.len(), out.display());
        }
        Command::Report { input, out } => {
            let report = cmd_report(&input, &out)?;
            for f in &report.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}
