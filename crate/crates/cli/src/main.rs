use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use peaksharp_cli::commands::{self, EstimateArgs, MethodArg, SweepOver};
use peaksharp_cli::weight::WeightMode;
use peaksharp_cli::{configure_threads, CliError, Result};

#[derive(Parser)]
#[command(name = "peaksharp", version, about = "Sharpen and unmix nonnegative spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EstimateFlags {
    /// Drop columns whose l1 norm is at most this fraction of the largest.
    #[arg(long, default_value_t = EstimateArgs::default().drop_tol)]
    drop_tol: f64,
    /// Minimum angle between selected columns, in degrees.
    #[arg(long, default_value_t = EstimateArgs::default().min_angle_deg)]
    min_angle_deg: f64,
}

impl EstimateFlags {
    fn args(&self) -> EstimateArgs {
        EstimateArgs { drop_tol: self.drop_tol, min_angle_deg: self.min_angle_deg }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate sources, mixtures and the true mixing matrix from a scenario file.
    Synth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario noise level (`inf` for none).
        #[arg(long)]
        snr_db: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sharpen every row of a mixtures file.
    Sharpen {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `<real>`, `auto[:fraction]` or `off`.
        #[arg(long, default_value_t = WeightMode::default())]
        k: WeightMode,
    },
    /// Estimate the mixing matrix and recover the sources.
    Unmix {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of sources.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = WeightMode::default())]
        k: WeightMode,
        #[arg(long, value_enum, default_value_t = MethodArg::Nnp)]
        mode: MethodArg,
        #[command(flatten)]
        estimate: EstimateFlags,
    },
    /// Score estimates against ground truth.
    Eval {
        /// Directory holding mixing_est.csv and sources_est.csv.
        #[arg(long)]
        input: PathBuf,
        /// Directory holding mixing_true.csv and sources.csv.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the separation over a range of weights or noise levels.
    Sweep {
        /// Scenario file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        over: SweepOver,
        /// Weight for the snr sweep, resolved on the noiseless mixtures.
        #[arg(long, default_value_t = WeightMode::default())]
        k: WeightMode,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "5:100:5")]
        k_values: String,
        #[arg(long, default_value = "30:120:10")]
        snr_values: String,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        estimate: EstimateFlags,
    },
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth { input, out, snr_db, seed } => {
            commands::cmd_synth(&commands::SynthArgs { input, out, snr_db, seed })
        }
        Command::Sharpen { input, out, k } => {
            commands::cmd_sharpen(&commands::SharpenArgs { input, out, weight: k }).map(drop)
        }
        Command::Unmix { input, out, n, k, mode, estimate } => commands::cmd_unmix(&commands::UnmixArgs {
            input,
            out,
            n,
            weight: k,
            method: mode,
            estimate: estimate.args(),
        })
        .map(drop),
        Command::Eval { input, truth, out } => {
            let m = commands::cmd_eval(&commands::EvalArgs { input, truth, out })?;
            println!("comon_index {}", m.comon_index);
            Ok(())
        }
        Command::Sweep { input, out, over, k, k_values, snr_values, seed, estimate } => {
            commands::cmd_sweep(&commands::SweepArgs {
                input,
                out,
                over,
                weight: k,
                k_values: commands::parse_range(&k_values).map_err(CliError::Config)?,
                snr_values: commands::parse_range(&snr_values).map_err(CliError::Config)?,
                seed,
                estimate: estimate.args(),
            })
            .map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
