use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drugner::corpus::CorpusFormat;
use drugner::embedding::CbowConfig;
use drugner::eval::ModelConfig;
use drugner::models::ModelKind;
use drugner::pipeline::{self, Determinism, GlobalOptions};
use drugner::representation::{DistanceBlock, Technique};
use drugner::selection::SelectionStrategy;
use drugner::{Error, Result};

/// Drug-name extraction: corpus statistics, embeddings, tuple and sequence
/// representations, neural classifiers and set-based scoring.
#[derive(Parser)]
#[command(name = "drugner", version)]
struct Cli {
    /// Overrides every seed in the run.
    #[arg(long, global = true, env = "DRUGNER_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "DRUGNER_OUT")]
    out: Option<PathBuf>,
    /// Parallel jobs for cross-validation, batched pipelines and `fast` embedding.
    #[arg(long, global = true, env = "DRUGNER_JOBS", default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, env = "DRUGNER_DETERMINISM", default_value = "strict")]
    determinism: Determinism,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an XML or TSV corpus into a sentence store and frequency table.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        format: Option<CorpusFormat>,
        #[arg(long, default_value = "train")]
        name: String,
    },
    /// Frequency partition and quartile report.
    Stats {
        store: PathBuf,
        #[arg(long, default_value_t = 3)]
        parts: usize,
    },
    /// Train CBOW embeddings.
    Embed {
        #[arg(long = "corpus", required = true)]
        corpora: Vec<PathBuf>,
        #[arg(long = "auxiliary")]
        auxiliary: Vec<PathBuf>,
        /// TOML file with embedding keys (dimension, window, epochs, ...).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build labeled tuples (techniques 1, 2) or sequences (technique 3).
    Represent {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        technique: Technique,
        #[arg(long, default_value = "displacement")]
        distance_block: DistanceBlock,
        #[arg(long, default_value = "train")]
        name: String,
    },
    /// Candidate selection over test tuples.
    Select {
        #[arg(long)]
        tuples: PathBuf,
        /// Corpus whose token counts rank the tuples.
        #[arg(long)]
        train_corpus: PathBuf,
        /// all, lower_two_thirds or cluster:X/Y
        #[arg(long, default_value = "all")]
        strategy: SelectionStrategy,
    },
    /// Train a classifier and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Model with default hyperparameters; ignored when --config is given.
        #[arg(long, default_value = "mlp")]
        model: ModelKind,
        /// TOML file with a `kind` key plus model hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a checkpoint against the gold names of a corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Run one or more pipeline config files end to end.
    Pipeline {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    let opts = GlobalOptions {
        seed: cli.seed,
        out: cli.out,
        jobs: cli.jobs.max(1),
        determinism: cli.determinism,
    };
    match cli.command {
        Command::Ingest { input, format, name } => {
            let s = pipeline::cmd_ingest(&input, format, &name, &opts)?;
            println!("{} sentences -> {}", s.sentences, s.store.display());
        }
        Command::Stats { store, parts } => print!("{}", pipeline::cmd_stats(&store, parts, &opts)?),
        Command::Embed {
            corpora,
            auxiliary,
            config,
        } => {
            let config: CbowConfig = config.as_ref().map(read_toml).transpose()?.unwrap_or_default();
            println!("{}", pipeline::cmd_embed(&corpora, &auxiliary, config, &opts)?.display());
        }
        Command::Represent {
            corpus,
            embedding,
            technique,
            distance_block,
            name,
        } => {
            let path = pipeline::cmd_represent(&corpus, &embedding, technique, distance_block, &name, &opts)?;
            println!("{}", path.display());
        }
        Command::Select {
            tuples,
            train_corpus,
            strategy,
        } => println!("{}", pipeline::cmd_select(&tuples, &train_corpus, strategy, &opts)?.display()),
        Command::Train { data, model, config } => {
            let config: ModelConfig = match config {
                Some(path) => read_toml(&path)?,
                None => match model {
                    ModelKind::Mlp => ModelConfig::Mlp(Default::default()),
                    ModelKind::Dbn => ModelConfig::Dbn(Default::default()),
                    ModelKind::Sae => ModelConfig::Sae(Default::default()),
                    ModelKind::Lstm => ModelConfig::Lstm(Default::default()),
                },
            };
            println!("{}", pipeline::cmd_train(&data, &config, &opts)?.display());
        }
        Command::Evaluate { model, data, gold } => {
            print!("{}", pipeline::cmd_evaluate(&model, &data, &gold, &opts)?.to_text());
        }
        Command::Pipeline { configs } => {
            for r in pipeline::cmd_pipeline(&configs, &opts)? {
                println!(
                    "{}\tP {:.4}\tR {:.4}\tF {:.4}",
                    r.out.display(),
                    r.report.precision,
                    r.report.recall,
                    r.report.f_score
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DRUGNER_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
