use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use tvdispatch_core::experiment::{run_experiment, sweep};
use tvdispatch_core::{Error, ExperimentConfig, ResultsBundle};

/// Exit codes: 0 success, 1 invariant failure or runtime error, 2 invalid
/// config or input file, 3 numerical blow-up.
#[derive(Parser)]
#[command(name = "tvdispatch", version, about = "Distributed online dispatch experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the per-step oracle; regret is not reported.
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its results bundle.
    Run(Common),
    /// Check schedule, graph and scenario shapes without running.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment per (kappa1, kappa2) grid point.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `k1:k2,k1:k2,...`; defaults to the config's `[sweep] points`.
        #[arg(long)]
        grid: Option<String>,
    },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
        }
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_)
        | Error::InvalidSchedule { .. }
        | Error::InvalidGraph(_)
        | Error::Io { .. }
        | Error::Parse { .. }
        | Error::Ingestion { .. }
        | Error::OutOfRange { .. }
        | Error::Contract(_) => Failure::Config(e.into()),
        _ => Failure::Runtime(e.into()),
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(classify)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.no_oracle {
        cfg.flags.compute_oracle = false;
    }
    Ok(cfg)
}

fn parse_grid(s: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| anyhow!("grid point {p:?} is not k1:k2"))?;
            let k1 = a.trim().parse().with_context(|| format!("grid point {p:?}"))?;
            let k2 = b.trim().parse().with_context(|| format!("grid point {p:?}"))?;
            Ok((k1, k2))
        })
        .collect()
}

fn report(bundle: &ResultsBundle) -> u8 {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6e}"));
    println!(
        "{}: status={:?} steps={} regret={} violation={}",
        bundle.dir.display(),
        bundle.manifest.status,
        bundle.manifest.steps_completed,
        fmt(bundle.final_regret),
        fmt(bundle.final_violation)
    );
    for w in &bundle.manifest.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = &bundle.failure {
        eprintln!("error: run stopped at t={}: {}", f.t, f.message);
        return 3;
    }
    if let Some(inv) = &bundle.invariants {
        if !inv.passed {
            eprintln!("error: invariant checks failed, see {}", bundle.path("invariants.json").display());
            return 1;
        }
    }
    0
}

fn cmd_run(common: &Common) -> Result<u8, Failure> {
    let cfg = load(common)?;
    let bundle = run_experiment(&cfg, common.out.as_deref()).map_err(classify)?;
    Ok(report(&bundle))
}

fn cmd_validate(config: &Path) -> Result<u8, Failure> {
    let cfg = ExperimentConfig::load(config).map_err(classify)?;
    cfg.validate().map_err(classify)?;
    println!("ok");
    Ok(0)
}

fn cmd_sweep(common: &Common, grid: Option<&str>) -> Result<u8, Failure> {
    let cfg = load(common)?;
    let points = match grid {
        Some(g) => parse_grid(g).map_err(Failure::Config)?,
        None => cfg.sweep.as_ref().map(|s| s.points.clone()).unwrap_or_default(),
    };
    let bundles = sweep(&cfg, &points, common.out.as_deref()).map_err(classify)?;
    Ok(bundles.iter().map(report).max().unwrap_or(0))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Validate { config } => cmd_validate(config),
        Command::Sweep { common, grid } => cmd_sweep(common, grid.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (Failure::Config(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.25:0.25, 0.125:0.125").unwrap(), vec![(0.25, 0.25), (0.125, 0.125)]);
        assert!(parse_grid("").unwrap().is_empty());
        assert!(parse_grid("0.25").is_err());
        assert!(parse_grid("a:b").is_err());
    }
}
