mod analysis;
mod config;
mod data;
mod error;
mod io;
mod model;
mod summarizer;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::{CliError, CliResult};

const THREADS_VAR: &str = "MODAL_ALIGN_THREADS";

/// Train and evaluate projection heads aligning protein structure-model and
/// language-model embeddings.
#[derive(Debug, Parser)]
#[command(name = "modal-align", version)]
struct Cli {
    /// JSON file of option values; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pair two embedding files and write the seeded train/validation/test split.
    Ingest(data::IngestArgs),
    /// Print template descriptions of FASTA entries as JSON lines.
    Describe(data::DescribeArgs),
    /// Label proteins rare or popular by molecule and organism category frequency.
    Rarity(data::RarityArgs),
    /// Train graph and text projection heads.
    Train(model::TrainArgs),
    /// Score a split: positive, negative and alignment scores.
    Eval(model::EvalArgs),
    /// Per-protein positive-pair cosines as CSV.
    PerProtein(model::EvalArgs),
    /// Pearson correlation matrix across per-protein score files.
    Correlate(analysis::CorrelateArgs),
    /// Relate per-protein scores to sequence length, chain count or rarity.
    Analyze(analysis::AnalyzeArgs),
    /// Top-k training neighbors of a protein and the augmented input text.
    Retrieve(analysis::RetrieveArgs),
    /// ROUGE-L and BLEU of candidate descriptions against references.
    Textscore(analysis::TextscoreArgs),
    /// Write synthetic paired embedding files.
    GenSynthetic(data::GenSyntheticArgs),
    /// Compare analytic gradients with finite differences on random instances.
    Gradcheck(model::GradcheckArgs),
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().map_err(|_| {
        CliError::user(
            "InvalidConfig",
            format!("{THREADS_VAR}={value:?} is not a non-negative integer"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::runtime("ThreadPool", e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Ingest(a) => data::ingest(a, &cfg),
        Command::Describe(a) => data::describe(a, &cfg),
        Command::Rarity(a) => data::rarity(a, &cfg),
        Command::Train(a) => model::train(a, &cfg),
        Command::Eval(a) => model::eval(a, &cfg),
        Command::PerProtein(a) => model::per_protein(a, &cfg),
        Command::Correlate(a) => analysis::correlate(a, &cfg),
        Command::Analyze(a) => analysis::analyze(a, &cfg),
        Command::Retrieve(a) => analysis::retrieve(a, &cfg),
        Command::Textscore(a) => analysis::textscore(a, &cfg),
        Command::GenSynthetic(a) => data::gen_synthetic_cmd(a, &cfg),
        Command::Gradcheck(a) => model::gradcheck(a, &cfg),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::user("UsageError", e.to_string().trim_end())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
