use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bridge_exp::config::{ExperimentConfig, Kind};
use bridge_exp::run::{run, RunOptions};
use bridge_exp::{figure, table_io};

#[derive(Parser)]
#[command(version, about = "Asymptotic and finite-sample risk experiments for bridge regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase-transition curve M_q(eps).
    Phase(RunArgs),
    /// Tuned AMSE over a noise grid.
    Amse(RunArgs),
    /// AMSE against its small-noise expansions.
    Expand(RunArgs),
    /// Oracle-tuned finite-sample replicates.
    Simulate(RunArgs),
    /// AMP trajectories against state evolution.
    AmpTrace(RunArgs),
    /// Render SVG plots from a CSV produced by another subcommand.
    Figure {
        /// CSV file to plot.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Gauss-Hermite order for the quadrature cross-check column.
    #[arg(long, default_value_t = bridge_core::quad::DEFAULT_HERMITE_ORDER)]
    quad_order: usize,
}

fn execute(kind: Kind, args: RunArgs) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate(kind)?;
    anyhow::ensure!(args.quad_order >= 2, "--quad-order must be at least 2");
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        anyhow::ensure!(w >= 1, "--workers must be at least 1");
        pool = pool.num_threads(w);
    }
    let pool = pool.build().context("building worker pool")?;
    let opts = RunOptions {
        quad_order: args.quad_order,
    };
    let table = pool.install(|| run(&cfg, opts));
    let path = args.out.join(cfg.output_name(kind));
    table_io::write_atomic(&table, &path)?;
    let bad = table.records.iter().filter(|r| !r.is_ok()).count();
    log::info!(
        "wrote {} records to {} ({bad} not OK)",
        table.records.len(),
        path.display()
    );
    println!("{}", path.display());
    Ok(bad == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phase(a) => execute(Kind::Phase, a),
        Command::Amse(a) => execute(Kind::AmseCurve, a),
        Command::Expand(a) => execute(Kind::ExpansionCheck, a),
        Command::Simulate(a) => execute(Kind::FiniteSample, a),
        Command::AmpTrace(a) => execute(Kind::AmpTrace, a),
        Command::Figure { csv, out } => table_io::read(&csv)
            .and_then(|t| figure::emit(&t, &out))
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
                true
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
