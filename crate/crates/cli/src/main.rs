//! `kgda`: batch front end for the knowledge graph adaptation pipeline.
//!
//! Every command prints one JSON summary line on stdout, also on failure.
//! Exit codes: 0 ok, 1 usage, 2 bad input data, 3 runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(
    name = "kgda",
    version,
    about = "Adapt a coarse-domain knowledge graph to a fine domain from unlabeled text"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Preprocess a raw corpus into sentences (and check the KG if given).
    Ingest(IngestArgs),
    /// Split the corpus into the run's partitions.
    Partition(RunArgs),
    /// Run the full iterative pipeline.
    Run(RunArgs),
    /// Re-score a run's final models on its held-out partition, or score a judged manual sample.
    Eval(EvalArgs),
    /// Write a run's output graph as TSV, JSON or Graphviz DOT.
    Export(ExportArgs),
    /// Sample confident discoveries into a CSV for manual judgement.
    SampleManual(SampleArgs),
    /// Print a run's summary and held-out scores.
    Report(ReportArgs),
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Validate inputs and print the plan without writing anything.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Clone, Args)]
struct KgPaths {
    #[arg(long)]
    kg_entities: Option<PathBuf>,
    #[arg(long)]
    kg_triples: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    /// Raw JSON-lines corpus of `{"doc_id", "text"}` objects.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    kg: KgPaths,
    /// Directory receiving `sentences.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Raw JSON-lines corpus.
    #[arg(
        long,
        conflicts_with = "sentences",
        required_unless_present = "sentences"
    )]
    corpus: Option<PathBuf>,
    /// Already preprocessed sentences, as written by `ingest`.
    #[arg(long)]
    sentences: Option<PathBuf>,
    #[command(flatten)]
    kg: KgPaths,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// `baseline` or `plugin:<command>`.
    #[arg(long)]
    backend: Option<String>,
    /// `none`, `no-cumulative` or `no-iter`.
    #[arg(long)]
    ablation: Option<String>,
    #[arg(long)]
    partitions: Option<usize>,
    /// 1-based held-out partition.
    #[arg(long)]
    heldout: Option<usize>,
    /// Continue from the run directory's checkpoint.
    #[arg(long)]
    resume: bool,
    /// Stop (exit 3) once this iteration is checkpointed.
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Debug, Clone, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    kg: KgPaths,
    /// Judged manual sample; scores it instead of the held-out partition.
    #[arg(long)]
    manual: Option<PathBuf>,
    /// Overrides the backend recorded in the run configuration.
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ExportFormat {
    Tsv,
    Json,
    Dot,
}

#[derive(Debug, Clone, Args)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: ExportFormat,
    /// Destination directory (tsv) or file (json, dot).
    #[arg(long)]
    to: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Items per category.
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Destination CSV; defaults to `reports/manual_sample.csv` in the run.
    #[arg(long)]
    to: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Partition(_) => "partition",
            Command::Run(_) => "run",
            Command::Eval(_) => "eval",
            Command::Export(_) => "export",
            Command::SampleManual(_) => "sample-manual",
            Command::Report(_) => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Ingest(a) => &a.common,
            Command::Partition(a) | Command::Run(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Export(a) => &a.common,
            Command::SampleManual(a) => &a.common,
            Command::Report(a) => &a.common,
        }
    }
}

/// Failure of a command, classified for the exit code.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(kgda_core::Error),
}

impl From<kgda_core::Error> for CliError {
    fn from(e: kgda_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn dispatch(cmd: &Command) -> CliResult<Value> {
    let common = cmd.common();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure the thread pool: {e}")))?;
    }
    match cmd {
        Command::Ingest(a) => commands::ingest(a),
        Command::Partition(a) => commands::partition(a),
        Command::Run(a) => commands::run(a),
        Command::Eval(a) => commands::eval(a),
        Command::Export(a) => commands::export(a),
        Command::SampleManual(a) => commands::sample_manual(a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let name = cli.command.name();
    let dry_run = cli.command.common().dry_run;
    match dispatch(&cli.command) {
        Ok(details) => {
            let mut line = json!({"command": name, "status": "ok", "dry_run": dry_run});
            if let (Value::Object(dst), Value::Object(src)) = (&mut line, details) {
                dst.extend(src);
            }
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kgda {name}: {}", e.message());
            let line = json!({"command": name, "status": "error", "exit_code": e.code(), "error": e.message()});
            println!("{line}");
            ExitCode::from(e.code())
        }
    }
}
