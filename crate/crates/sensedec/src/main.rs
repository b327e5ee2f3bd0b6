//! Command-line driver: load a TOML experiment configuration, train the
//! transmission system once, run the requested sweep, and emit the sorted
//! result CSV to stdout or a file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sensedec::harness::config::ExperimentConfig;
use sensedec::harness::experiments::{
    build_pipeline, run_alternating, run_baseline, run_capacity_sweep, run_expertise_sweep,
    run_snr_sweep, Pipeline,
};
use sensedec::harness::results::{emit_csv, write_csv, ResultRow};
use sensedec::harness::theory::{run_theory_checks, theory_rows};

#[derive(Parser)]
#[command(
    name = "sensedec",
    version,
    about = "Simulate a learned multi-view transmission link feeding an exemplar-based decision model"
)]
struct Cli {
    /// Worker threads for the experiment fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep channel quality over the configured grid.
    Snr(RunArgs),
    /// Sweep the decision maker's knowledge-base size.
    Expertise(RunArgs),
    /// Sweep the decision maker's attention capacity.
    Capacity(RunArgs),
    /// Alternate transmission-system updates with decision-model refits.
    Alternate(RunArgs),
    /// Compare the digital reference chain against the learned system.
    Baseline(RunArgs),
    /// Verify the information-theoretic identity battery.
    TheoryCheck(TheoryArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Master seed for instance generation.
    #[arg(long, default_value_t = 17)]
    seed: u64,
    /// Random instances per identity.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Also write the report as a CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("setting the worker-thread count")?;
    }
    match cli.command {
        Command::Snr(args) => run_sweep(args, "snr sweep", run_snr_sweep),
        Command::Expertise(args) => run_sweep(args, "expertise sweep", run_expertise_sweep),
        Command::Capacity(args) => run_sweep(args, "capacity sweep", run_capacity_sweep),
        Command::Alternate(args) => run_sweep(args, "alternating training", run_alternating),
        Command::Baseline(args) => run_sweep(args, "baseline comparison", run_baseline),
        Command::TheoryCheck(args) => run_theory(args),
    }
}

fn run_sweep(
    args: RunArgs,
    what: &str,
    driver: fn(&Pipeline) -> sensedec::Result<Vec<ResultRow>>,
) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    eprintln!("training the transmission system (master seed {})", config.master_seed);
    let pipeline = build_pipeline(config).context("building the pipeline")?;
    eprintln!(
        "system ready: {} views, {} channel uses per sample, final training loss {:.4}",
        pipeline.system.num_views(),
        pipeline.system.channel_uses(),
        pipeline.training_loss.last().copied().unwrap_or(f64::NAN),
    );
    eprintln!("running the {what}");
    let rows = driver(&pipeline).with_context(|| format!("running the {what}"))?;
    emit(rows, args.out.as_deref())
}

fn emit(rows: Vec<ResultRow>, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let count = rows.len();
            write_csv(rows, path)?;
            eprintln!("wrote {count} rows to {}", path.display());
        }
        None => print!("{}", emit_csv(rows)),
    }
    Ok(())
}

fn run_theory(args: TheoryArgs) -> Result<()> {
    let reports = run_theory_checks(args.seed, args.instances)?;
    let mut all_pass = true;
    for report in &reports {
        println!(
            "{}: {} (worst residual {:.3e} over {} instances)",
            report.name,
            if report.pass { "pass" } else { "FAIL" },
            report.max_residual,
            report.instances,
        );
        all_pass &= report.pass;
    }
    if let Some(path) = &args.out {
        write_csv(theory_rows(&reports), path)?;
        eprintln!("wrote the report to {}", path.display());
    }
    if !all_pass {
        bail!("at least one identity check failed");
    }
    Ok(())
}
