//! alpool command line: generate synthetic corpora, run acquisition
//! experiment grids, and render comparison reports.
//!
//! Exit codes: 0 success, 1 runtime/data failure, 2 usage error.

mod report;
mod runcfg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alpool_core::corpus::load_corpus;
use alpool_core::engine::{prepare_artifacts, run_grid};
use alpool_core::synthgen::{generate_to_file, SynthSpec};

#[derive(Parser)]
#[command(name = "alpool", version, about = "Pool-based active learning for multi-label text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-label corpus plus its manifest.
    Synth(SynthArgs),
    /// Run a strategy x model x seed experiment grid over a corpus.
    Run(RunArgs),
    /// Summarize result CSVs into a markdown table and curve data.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of documents.
    #[arg(long, default_value_t = 2000)]
    docs: usize,
    /// Number of labels.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    labels: u64,
    /// Vocabulary size.
    #[arg(long, default_value_t = 2000)]
    vocab: usize,
    /// Tokens per document.
    #[arg(long, default_value_t = 80)]
    tokens: usize,
    /// Power-law exponent for label imbalance.
    #[arg(long, default_value_t = 1.5)]
    exponent: f64,
    /// Fraction of tokens drawn from label-indicative vocabulary.
    #[arg(long, default_value_t = 0.7)]
    signal: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output corpus path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Corpus file to run on.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Flat key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated strategy names.
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated model names (lr, rf, fnn).
    #[arg(long)]
    models: Option<String>,
    /// Comma-separated RNG seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// Selection iterations per experiment.
    #[arg(long)]
    iterations: Option<usize>,
    /// Batch size per iteration.
    #[arg(long)]
    batch: Option<usize>,
    /// Label-space size (top-k most frequent codes).
    #[arg(long)]
    topk: Option<usize>,
    /// Parallel grid workers.
    #[arg(long)]
    jobs: Option<usize>,
    /// Directory receiving one results CSV per grid cell.
    #[arg(long)]
    outdir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory containing results CSVs.
    #[arg(long)]
    indir: PathBuf,
    /// Output markdown path; curve data lands next to it.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("ALPOOL_LOG", "info"),
    )
    .format_timestamp(None)
    .init();

    let cli = Cli::parse();
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_synth(args: SynthArgs) -> ExitCode {
    let spec = SynthSpec {
        n_docs: args.docs,
        n_labels: args.labels as usize,
        vocab_size: args.vocab,
        tokens_per_doc: args.tokens,
        power_exponent: args.exponent,
        label_signal_strength: args.signal,
        rng_seed: args.seed,
    };
    match generate_to_file(&spec, &args.out) {
        Ok(docs) => {
            log::info!("wrote {} documents to {}", docs.len(), args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let resolved = match runcfg::resolve(&args) {
        Ok(r) => r,
        Err(runcfg::ResolveError::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(runcfg::ResolveError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };

    let docs = match load_corpus(&resolved.corpus) {
        Ok(docs) => docs,
        Err(e) => {
            eprintln!("error: cannot read corpus {}: {e}", resolved.corpus.display());
            return ExitCode::from(1);
        }
    };
    let artifacts = match prepare_artifacts(docs, &resolved.prepare) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    log::info!(
        "grid: {} cells over {} train / {} test documents",
        resolved.configs.len(),
        artifacts.train.n_rows(),
        artifacts.test.n_rows()
    );
    match run_grid(&artifacts, &resolved.configs, resolved.jobs, &resolved.outdir) {
        Ok(paths) => {
            log::info!("wrote {} result files to {}", paths.len(), resolved.outdir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_report(args: ReportArgs) -> ExitCode {
    match report::render(&args.indir, &args.out) {
        Ok(summary) => {
            log::info!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
