//! `labelcon` command-line front end.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use labelcon::loss::{KernelKind, SimilarityKernel};

/// Invalid flags, inputs or configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "labelcon", version, about = "Label-aware contrastive training for multi-label classification")]
struct Cli {
    /// Worker threads for parallel loss evaluation (0 = all cores).
    #[arg(long, global = true, env = "LABELCON_THREADS", default_value_t = 0)]
    threads: usize,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic label-correlated dataset.
    Synth(commands::SynthArgs),
    /// Run the two-phase training plan and write a checkpoint.
    Train(commands::TrainArgs),
    /// Micro/Macro-F1 of a checkpoint per language.
    Eval(commands::EvalArgs),
    /// Cosine similarity against label Hamming distance.
    Analyze(commands::AnalyzeArgs),
    /// Train every ablation variant and report dev Micro-F1.
    Ablate(commands::AblateArgs),
    /// Two-dimensional repositioning experiment under the contrastive loss.
    Toy(commands::ToyArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(commands::GradcheckArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    RawCosine,
    ExpCosine,
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    /// Similarity kernel inside the contrastive loss.
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    /// Temperature of the exp-cosine kernel.
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Lower clamp of the log argument.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
}

impl KernelArgs {
    pub fn resolve(&self, default: KernelKind) -> SimilarityKernel {
        let kind = match self.kernel {
            Some(KernelArg::RawCosine) => KernelKind::RawCosine,
            Some(KernelArg::ExpCosine) => KernelKind::ExpCosine,
            None => default,
        };
        SimilarityKernel {
            kind,
            temperature: self.temperature,
            epsilon: self.epsilon,
        }
    }
}

pub fn out_path(path: Option<PathBuf>, default: &str) -> PathBuf {
    path.unwrap_or_else(|| PathBuf::from(default))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<labelcon::Error>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
        if cause.is::<UsageError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }

    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Toy(a) => commands::toy(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
