//! `spsn`: schema inference, model construction, training, inference and
//! sampling for tree-structured JSON documents.

mod commands;
mod config;
mod io;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "spsn", version, about = "Sum-product-set networks for JSON documents")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Infer a schema from a corpus.
    Schema {
        /// JSONL file or directory of .json files.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an untrained model from a schema.
    Build {
        #[arg(long)]
        schema: PathBuf,
        /// Sum/product layer pairs per block.
        #[arg(long, default_value_t = 2)]
        n_l: usize,
        /// Children per sum unit.
        #[arg(long, default_value_t = 2)]
        n_s: usize,
        /// Children per product unit.
        #[arg(long, default_value_t = 2)]
        n_p: usize,
        /// Number of roots (classes).
        #[arg(long, default_value_t = 1)]
        classes: usize,
        /// Integer fields with at most this many distinct values are categorical.
        #[arg(long, default_value_t = 100)]
        k_cat: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit model parameters with Adam.
    Train(TrainArgs),
    /// Log density of complete documents.
    Eval(EvalArgs),
    /// Log marginal density; missing or null values are integrated out.
    Marginal(EvalArgs),
    /// Posterior class probabilities.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Optional `doc_id,label` file; accuracy is reported when given.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw documents from a model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the class each document was drawn from.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Check structural constraints and, with --deep, the brute-force oracles.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        deep: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classification accuracy as leaves go missing at random.
    MissingSweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Nll,
    Xent,
}

#[derive(clap::Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Nll)]
    objective: ObjectiveArg,
    /// `doc_id,label` file; required for xent and for models with several roots.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Share of the corpus held out for checkpoint selection.
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    /// Perturbation of initial leaf parameters, in corpus standard deviations.
    #[arg(long, default_value_t = 0.0)]
    init_jitter: f64,
    /// Keep the model's current parameters instead of initializing from the data.
    #[arg(long)]
    no_init: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch scores as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Root (class) to evaluate.
    #[arg(long, default_value_t = 0)]
    root: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A check that ran and did not pass.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

const EXIT_VALIDATION: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ValidationFailed>().is_some() {
        return EXIT_VALIDATION;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<spsn::Error>() {
            return match e {
                spsn::Error::NonFiniteGradient { .. } | spsn::Error::TooLarge { .. } => EXIT_NUMERIC,
                spsn::Error::InvalidArgument(_) => EXIT_VALIDATION,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let args = match config::expand(args, &Cli::command()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let cli = Cli::parse_from(args);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
