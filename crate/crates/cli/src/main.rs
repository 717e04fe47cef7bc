//! `ddg`: experiment runner for guided discrete diffusion. Every command
//! writes CSV (and optionally SVG) plus a `<out>.manifest.csv` run manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod run;
mod svg;

#[derive(Parser)]
#[command(name = "ddg", version, about = "Exact and simulated guided discrete diffusion")]
struct Cli {
    /// Fail (exit 2) when any warning counter exceeds N; bare `--strict` means N = 0.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "0", require_equals = true, value_name = "N")]
    strict: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct NoiseArgs {
    /// `loglinear:<delta>` or `const:<sigma>`.
    #[arg(long, default_value = "loglinear:0.99")]
    pub schedule: String,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
}

/// Overrides for files without `# V=`, `# d=`, `# mode=` comments.
#[derive(Args, Clone)]
pub struct SpaceArgs {
    #[arg(long)]
    pub mode: Option<String>,
    /// Symbols per position, the mask included.
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub dims: Option<usize>,
}

#[derive(Args, Clone)]
pub struct PairArgs {
    /// Conditional model `p` as a distribution CSV.
    #[arg(long)]
    pub p: PathBuf,
    /// Guiding model `q` as a distribution CSV.
    #[arg(long)]
    pub q: PathBuf,
}

#[derive(Args, Clone)]
pub struct SamplerArgs {
    /// `euler` or `tau`.
    #[arg(long, default_value = "euler")]
    pub sampler: String,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trajectories: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub t_end: f64,
}

/// Model pair from files or from the built-in toy dataset.
#[derive(Args, Clone)]
pub struct SourceArgs {
    #[arg(long, requires = "q")]
    pub p: Option<PathBuf>,
    #[arg(long, requires = "p")]
    pub q: Option<PathBuf>,
    /// Use toy class K against the toy mixture instead of files.
    #[arg(long, conflicts_with = "p")]
    pub toy_class: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a distribution under the forward noising process.
    Forward {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the guided reverse process.
    Sample {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        pair: PairArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// `unlocking`, `simple` or `normalized`.
        #[arg(long, default_value = "normalized")]
        mechanism: String,
        /// Guidance schedule, e.g. `const:2` or `piecewise:0.3,0.6;1,3,1`.
        #[arg(long, default_value = "const:1", allow_hyphen_values = true)]
        w_schedule: String,
        /// Times at which the empirical state is also written.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        /// Report positions still masked at `t_end` instead of drawing them.
        #[arg(long)]
        keep_masked: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact closed-form evaluators.
    #[command(subcommand)]
    ClosedForm(commands::ClosedForm),
    /// Mechanism comparison on a one-token masked pair.
    Compare {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4", allow_hyphen_values = true)]
        w_grid: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Guidance schedule sweep scored against exact references.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, default_value = "normalized")]
        mechanism: String,
        /// Repeat for each schedule to sweep.
        #[arg(long = "w-schedule", required = true, allow_hyphen_values = true)]
        w_schedules: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Toy dataset tables, tilted and combined panels, and curves.
    Toy(commands::ToyArgs),
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("DDG_THREADS") {
        let n: usize = raw.trim().parse().with_context(|| format!("DDG_THREADS=`{raw}` is not a count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Vec<String>> {
    configure_threads()?;
    let strict = cli.strict;
    let run = match cli.command {
        Command::Forward { space, noise, t, dist, out } => commands::forward(&space, &noise, t, &dist, &out)?,
        Command::Sample { space, noise, pair, sampler, mechanism, w_schedule, snapshots, keep_masked, out } => {
            commands::sample(commands::SampleRequest {
                space: &space,
                noise: &noise,
                pair: &pair,
                sampler: &sampler,
                mechanism: &mechanism,
                w_schedule: &w_schedule,
                snapshots: &snapshots,
                keep_masked,
                out: &out,
            })?
        }
        Command::ClosedForm(cmd) => commands::closed_form(cmd)?,
        Command::Compare { source, noise, sampler, w_grid, out } => {
            commands::compare(&source, &noise, &sampler, &w_grid, &out)?
        }
        Command::Sweep { source, noise, sampler, mechanism, w_schedules, out } => {
            commands::sweep(&source, &noise, &sampler, &mechanism, &w_schedules, &out)?
        }
        Command::Toy(args) => commands::toy(&args)?,
    };
    run.finish(strict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(exceeded) if exceeded.is_empty() => ExitCode::SUCCESS,
        Ok(exceeded) => {
            for line in exceeded {
                eprintln!("ddg: warning: {line}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ddg: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
