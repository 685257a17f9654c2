use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beltway::assemble::Mode;
use beltway_cli::commands::{
    cmd_census, cmd_certify, cmd_experiment, cmd_recover, cmd_simulate, exit_code,
    parse_norm_spec, CensusArgs, CertifyArgs, ExperimentArgs, RecoverArgs, SimulateArgs,
};

/// Recover point configurations (up to orthogonal transformation) from
/// unlabeled second-moment data, and reproduce the accompanying experiments.
#[derive(Parser)]
#[command(name = "beltway", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a configuration and write its (optionally noisy) second moment.
    Simulate(SimulateOpts),
    /// Recover a configuration from a second-moment CSV.
    Recover(RecoverOpts),
    /// Run one of the built-in experiments (fig1..fig5).
    Experiment(ExperimentOpts),
    /// Rearrangement census over sampled configurations.
    Census(CensusOpts),
    /// Certify uniqueness of a configuration by full enumeration.
    Certify(CertifyOpts),
}

#[derive(Args)]
struct SimulateOpts {
    /// Number of points.
    #[arg(long)]
    m: usize,
    /// Ambient dimension.
    #[arg(long)]
    n: usize,
    /// Norm classes as RADIUSxCOUNT, comma separated (e.g. 1x5,2x1).
    #[arg(long)]
    norms: String,
    /// Variance of the Gram-space noise; adds moment_noisy.csv.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RecoverOpts {
    /// Second-moment CSV (header d1,d2,ip).
    #[arg(long)]
    moment: PathBuf,
    /// exact, sphere or noisy.
    #[arg(long)]
    mode: String,
    /// Target rank (ambient dimension).
    #[arg(long)]
    n: usize,
    /// Noise-scale estimate for noisy mode; 0 disables the Cayley-Menger
    /// pre-filter and ranks every candidate.
    #[arg(long, default_value_t = 0.0)]
    sigma_hat: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output JSON path.
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentOpts {
    /// fig1 (distance distributions), fig2 (exact grid, R^3), fig3 (R^4),
    /// fig4 (sphere), fig5 (noise sweep).
    #[arg(long)]
    figure: String,
    /// Override the per-cell trial count.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also render simple SVG charts.
    #[arg(long)]
    svg: bool,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CensusOpts {
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    /// Norm classes as RADIUSxCOUNT, comma separated.
    #[arg(long)]
    norms: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all logical cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CertifyOpts {
    /// Configuration CSV (header x1..xn).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn configure_pool(jobs: Option<usize>) {
    if let Some(j) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
}

fn run() -> beltway::Result<()> {
    match Cli::parse().command {
        Command::Simulate(o) => cmd_simulate(&SimulateArgs {
            m: o.m,
            n: o.n,
            norms: parse_norm_spec(&o.norms)?,
            sigma2: o.sigma2,
            seed: o.seed,
            out_dir: o.out_dir,
        }),
        Command::Recover(o) => cmd_recover(&RecoverArgs {
            moment: o.moment,
            mode: o
                .mode
                .parse::<Mode>()
                .map_err(beltway::Error::InvalidInput)?,
            n: o.n,
            sigma_hat: o.sigma_hat,
            seed: o.seed,
            out: o.out,
        }),
        Command::Experiment(o) => {
            configure_pool(o.jobs);
            cmd_experiment(&ExperimentArgs {
                figure: o.figure,
                trials: o.trials,
                seed: o.seed,
                out_dir: o.out_dir,
                svg: o.svg,
            })
        }
        Command::Census(o) => {
            configure_pool(o.jobs);
            cmd_census(&CensusArgs {
                trials: o.trials,
                m: o.m,
                n: o.n,
                norms: parse_norm_spec(&o.norms)?,
                seed: o.seed,
                out_dir: o.out_dir,
            })
        }
        Command::Certify(o) => cmd_certify(&CertifyArgs {
            config: o.config,
            out_dir: o.out_dir,
        }),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
