//! The `storyline` command line: one subcommand per pipeline stage, each
//! appending a run record (effective config, seed, input and output digests).

mod commands;
mod config;
mod runlog;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

pub use commands::{card_path, tag_metrics, ModelCard};
pub use config::{resolve, resolve_pair, Overrides};
pub use runlog::{sha256_file, RunRecord};

pub const DEFAULT_RUN_LOG: &str = "storyline-runs.jsonl";

#[derive(Debug, Parser)]
#[command(name = "storyline", version, about = "Shot-level video understanding pipeline")]
pub struct Cli {
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key=value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `key=value` override, applied after the config file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON Lines file the run record is appended to.
    #[arg(long, global = true, default_value = DEFAULT_RUN_LOG)]
    pub run_log: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect shots in an FSEQ file.
    Segment {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input file stem.
        #[arg(long)]
        video: Option<String>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Encode every shot of an FSEQ file into an SHTF cache.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        shots: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate a synthetic corpus: features.shtf, manifest.jsonl, ground_truth.jsonl.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Partition a manifest's movies into train/val/test.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train genre and keyword heads on the split's trailers (or movies).
    TrainTags {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// recall@k and MAP of a tag model on one split.
    EvalTags {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Per-shot response of one tag over a video, plus its top shots on stdout.
    Retrieve {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        video: String,
        #[arg(long)]
        tag: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write next-shot questions for one split and setting.
    GenQuestions {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the next-shot scorer on a question file.
    TrainTemporal {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Next-shot accuracy of the model and the average-cosine baseline.
    EvalTemporal {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        questions: PathBuf,
        /// Omit to score a freshly initialised model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Train the multiple-choice QA head.
    TrainQa {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
        /// Word-vector text file; omit to embed text by feature hashing.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Multiple-choice accuracy of a QA model.
    EvalQa {
        #[arg(long, required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Segment { .. } => "segment",
            Command::Extract { .. } => "extract",
            Command::Synth { .. } => "synth",
            Command::Split { .. } => "split",
            Command::TrainTags { .. } => "train-tags",
            Command::EvalTags { .. } => "eval-tags",
            Command::Retrieve { .. } => "retrieve",
            Command::GenQuestions { .. } => "gen-questions",
            Command::TrainTemporal { .. } => "train-temporal",
            Command::EvalTemporal { .. } => "eval-temporal",
            Command::TrainQa { .. } => "train-qa",
            Command::EvalQa { .. } => "eval-qa",
        }
    }
}

fn overrides(cli: &Cli) -> Result<Overrides> {
    let mut o = match &cli.config {
        Some(p) => Overrides::load(p)?,
        None => Overrides::default(),
    };
    for s in &cli.set {
        o.push(s)?;
    }
    Ok(o)
}

fn dispatch(cli: &Cli, o: &Overrides, io: &mut runlog::Io) -> Result<commands::Outcome> {
    use commands as c;
    let seed = cli.seed;
    match &cli.command {
        Command::Segment { input, video, output } => c::segment(io, o, seed, input, video.as_deref(), output),
        Command::Extract { input, shots, output } => c::extract(io, o, seed, input, shots, output),
        Command::Synth { out_dir } => c::synth(io, o, seed, out_dir),
        Command::Split { manifest, output } => c::split(io, o, seed, manifest, output),
        Command::TrainTags {
            manifest,
            features,
            split,
            output,
        } => c::train_tags_cmd(io, o, seed, manifest, features, split, output),
        Command::EvalTags {
            manifest,
            features,
            split,
            model,
            output,
            predictions,
        } => c::eval_tags_cmd(io, o, seed, manifest, features, split, model, output, predictions.as_deref()),
        Command::Retrieve {
            features,
            model,
            video,
            tag,
            output,
        } => c::retrieve(io, o, seed, features, model, video, tag, output),
        Command::GenQuestions { features, split, output } => c::gen_questions(io, o, seed, features, split, output),
        Command::TrainTemporal {
            features,
            questions,
            validation,
            output,
        } => c::train_temporal(io, o, seed, features, questions, validation.as_deref(), output),
        Command::EvalTemporal {
            features,
            questions,
            model,
            output,
            results,
        } => c::eval_temporal(io, o, seed, features, questions, model.as_deref(), output, results.as_deref()),
        Command::TrainQa {
            features,
            items,
            validation,
            embeddings,
            output,
        } => c::train_qa_cmd(io, o, seed, features, items, validation.as_deref(), embeddings.as_deref(), output),
        Command::EvalQa {
            features,
            items,
            model,
            embeddings,
            output,
            results,
        } => c::eval_qa_cmd(io, o, seed, features, items, model, embeddings.as_deref(), output, results.as_deref()),
    }
}

/// Runs a parsed command and appends its run record.
pub fn execute(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let o = overrides(cli)?;
    let mut io = runlog::Io::default();
    let outcome = dispatch(cli, &o, &mut io)?;
    let record = RunRecord {
        command: cli.command.name().to_string(),
        config: outcome.config,
        seed: outcome.seed,
        input_digests: runlog::digests(&io.inputs)?,
        output_digests: runlog::digests(&io.outputs)?,
        wall_time_ms: start.elapsed().as_millis() as u64,
    };
    runlog::append(&cli.run_log, &record)
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("--threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Machine-readable failure line: `error<TAB>kind<TAB>message`.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace(['\t', '\n'], " ");
    format!("error\t{}\t{msg}", e.kind())
}

/// Entry point for the binary; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads(cli.threads).and_then(|_| execute(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            1
        }
    }
}

