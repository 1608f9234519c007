use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smallog_core::log_io::LogFormat;
use smallog_core::prediction::PredictionTask;
use smallog_core::rational::{parse_rational, Rational};
use smallog_core::reducer::ReductionMethod;
use smallog_core::splitter::SplitMethod;

mod commands;

/// Generate small event logs from reference logs and evaluate next-activity
/// and next-role predictors on a fixed test set.
#[derive(Debug, Parser)]
#[command(name = "smallog", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct LogArgs {
    /// Event log file (XES or CSV, optionally gzip-compressed).
    #[arg(long)]
    log: PathBuf,
    /// Log format; inferred from the file extension when omitted.
    #[arg(long)]
    format: Option<LogFormat>,
    /// TOML column mapping for CSV logs not in canonical layout.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RoleArgs {
    /// Payload attribute holding the role of each event.
    #[arg(long)]
    role_attribute: Option<String>,
    /// TOML table mapping resources to roles.
    #[arg(long)]
    role_mapping: Option<PathBuf>,
}

fn rational_arg(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print descriptive statistics of a log.
    Stats {
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        roles: RoleArgs,
        /// Write the statistics as CSV here instead of printing a table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List trace variants with their empirical probabilities.
    Variants {
        #[command(flatten)]
        log: LogArgs,
        /// Comma-joined attribute keys, e.g. `activity,resource`.
        #[arg(long, default_value = "activity")]
        perspective: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a log into training and test logs and extract its label registry.
    Split {
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        roles: RoleArgs,
        /// Training share, strictly between 0 and 1.
        #[arg(long, default_value = "0.7", value_parser = rational_arg)]
        ratio: Rational,
        #[arg(long, default_value = "temporal")]
        method: SplitMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for train.csv, test.csv, split.txt and registry.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove a share of the traces of a training log.
    Reduce {
        #[command(flatten)]
        log: LogArgs,
        /// Share of traces to remove, in [0, 1).
        #[arg(long, value_parser = rational_arg)]
        factor: Rational,
        #[arg(long, default_value = "temporal_oldest")]
        method: ReductionMethod,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Perspective for the bias measure and for target variants.
        #[arg(long, default_value = "activity")]
        perspective: String,
        /// Target variant for variant_targeted, as comma-joined labels; repeatable.
        #[arg(long = "target")]
        targets: Vec<String>,
        /// Output directory for reduced.csv and removed.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build prediction instances from a test log.
    Instances {
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        roles: RoleArgs,
        /// Registry file written by `split`.
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value = "next_activity")]
        task: PredictionTask,
        /// Output directory for instances.csv and targets.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the built-in back-off baseline and predict an instances file.
    Predict {
        /// Training log.
        #[command(flatten)]
        log: LogArgs,
        #[command(flatten)]
        roles: RoleArgs,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        /// Longest context window of the baseline.
        #[arg(long, default_value_t = smallog_core::prediction::DEFAULT_ORDER)]
        order: usize,
        /// Predictions file, one label per line.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against targets.
    Evaluate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long, default_value = "next_activity")]
        task: PredictionTask,
        /// Per-class CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment grid from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; defaults to the number of processors.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the wide accuracy tables from a results_long.csv.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_INPUT: u8 = 1;
const EXIT_INTERNAL: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    let internal = err
        .chain()
        .filter_map(|e| e.downcast_ref::<smallog_core::Error>())
        .any(|e| !e.is_user_error());
    if internal {
        EXIT_INTERNAL
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMALLOG_LOG_LEVEL", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    match std::panic::catch_unwind(|| commands::dispatch(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
