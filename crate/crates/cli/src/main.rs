//! `permround`: batch experiments for randomized rounding of orthogonal
//! matrices.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 input that
//! fails validation, 4 numerical failure.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use permround::concentration::GridConfig;
use permround::nconv::Orientation;

use crate::commands::{ApproximateArgs, QapSource, Sink};
use crate::config::{ExperimentConfig, OutputFormat, Overrides};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "permround", version, about = "Randomized rounding of orthogonal matrices to permutations")]
struct Cli {
    /// Seed for all random draws.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output format. Tables default to csv; approximate and qap default
    /// to json; haar writes the plain matrix format unless json is chosen.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Output file (standard output if omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    WeightFirst,
    PermutationFirst,
}

#[derive(Subcommand)]
enum Command {
    /// Round an orthogonal matrix at Gaussian points.
    Round {
        matrix: PathBuf,
        #[arg(long, default_value_t = 10)]
        samples: usize,
    },
    /// Monte Carlo non-commutative convex approximation with error report.
    Approximate {
        matrix: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, value_enum, default_value = "weight-first")]
        orientation: OrientationArg,
        /// Skip per-permutation counts and traces (saves memory at large n).
        #[arg(long)]
        no_track: bool,
    },
    /// Error scaling table over dimensions, sample counts and repetitions.
    Scaling {
        /// Key-value config file; command-line flags override its entries.
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        sample_counts: Option<Vec<usize>>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Order-statistic tail bounds against simulation.
    Concentration {
        #[arg(long, value_delimiter = ',', default_value = "100,1000")]
        n_values: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.4")]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Eigenvalue bound and rounding heuristic for a QAP instance.
    Qap {
        /// Instance file (QAPLIB-style text or JSON).
        instance: Option<PathBuf>,
        /// Use the built-in zero-gap instance of size 2m instead of a file.
        #[arg(long, conflicts_with = "instance")]
        counterexample: Option<usize>,
        #[arg(long, default_value_t = permround::qap::DEFAULT_HEURISTIC_SAMPLES)]
        samples: usize,
    },
    /// Sample a Haar-random orthogonal matrix.
    Haar { n: usize },
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.threads == 0 {
        return Err(CliError::Validation("--threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let seed = cli.seed.unwrap_or(0);
    let sink = Sink::new(cli.out.clone());
    match cli.command {
        Command::Round { matrix, samples } => {
            commands::round(&matrix, samples, seed, cli.format.unwrap_or(OutputFormat::Csv), &sink)
        }
        Command::Approximate {
            matrix,
            samples,
            orientation,
            no_track,
        } => commands::approximate(
            ApproximateArgs {
                matrix: &matrix,
                samples,
                orientation: match orientation {
                    OrientationArg::WeightFirst => Orientation::WeightFirst,
                    OrientationArg::PermutationFirst => Orientation::PermutationFirst,
                },
                track_permutations: !no_track,
            },
            seed,
            cli.format.unwrap_or(OutputFormat::Json),
            &sink,
        ),
        Command::Scaling {
            config,
            n_values,
            sample_counts,
            repetitions,
        } => {
            let base = match config {
                Some(p) => ExperimentConfig::parse(
                    &std::fs::read_to_string(&p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
                )?,
                None => ExperimentConfig::default(),
            };
            let config = base.apply(Overrides {
                seed: cli.seed,
                n_values,
                sample_counts,
                repetitions,
                output_format: cli.format,
                output_path: cli.out,
            });
            commands::scaling(&config)
        }
        Command::Concentration {
            n_values,
            epsilons,
            trials,
        } => {
            let grid = GridConfig {
                n_values,
                epsilons,
                trials,
            };
            commands::concentration(&grid, seed, cli.format.unwrap_or(OutputFormat::Csv), &sink)
        }
        Command::Qap {
            instance,
            counterexample,
            samples,
        } => {
            let source = match (&instance, counterexample) {
                (Some(p), None) => QapSource::File(p),
                (None, Some(m)) => QapSource::Counterexample(m),
                _ => return Err(CliError::Input("give an instance file or --counterexample".into())),
            };
            commands::qap(source, samples, seed, cli.format.unwrap_or(OutputFormat::Json), &sink)
        }
        Command::Haar { n } => commands::haar(n, seed, cli.format.unwrap_or(OutputFormat::Csv), &sink),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("permround: {e}");
            e.exit_code()
        }
    }
}
