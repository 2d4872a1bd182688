//! File-based stages behind the command-line tool, and the one-shot pipeline
//! driven by a TOML config.

mod cache;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

pub use cache::ArtifactCache;

use crate::corpus::{
    build_frequency_table, parse_semeval_corpus, read_plain_text, stats_report, tokenize_all, write_tsv,
    AnnotatedSentence, CorpusFormat, FrequencyTable, TokenizedSentence,
};
use crate::embedding::{train_cbow, CbowConfig, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, gold_nameset, run_scenario_cached, score, sequences_to_nameset, split_corpus, tuples_to_nameset,
    CvConfig, EvalReport, ModelConfig, Representation, ScenarioConfig, ScenarioManifest, TrainedModel,
};
use crate::models::checkpoint::Checkpoint;
use crate::models::{dbn_train, lstm_predict, lstm_train, mlp_train, sae_train, ModelKind};
use crate::representation::{build_drug_lexicon, read_tuples, write_tuples, DistanceBlock, Technique};
use crate::selection::{apply_selection, SelectionStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Determinism {
    /// Single-writer embedding training; byte-identical reruns.
    #[default]
    Strict,
    /// Sharded embedding training across `jobs` threads.
    Fast,
}

impl FromStr for Determinism {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Determinism::Strict),
            "fast" => Ok(Determinism::Fast),
            other => Err(format!("unknown determinism `{other}` (expected strict or fast)")),
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct GlobalOptions {
    /// Overrides config seeds when set.
    pub seed: Option<u64>,
    /// Output directory; commands use a default when unset.
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub determinism: Determinism,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions {
            seed: None,
            out: None,
            jobs: 1,
            determinism: Determinism::Strict,
        }
    }
}

pub const DEFAULT_OUT: &str = "drugner-out";

impl GlobalOptions {
    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn embedding(&self, mut config: CbowConfig) -> CbowConfig {
        if let Some(seed) = self.seed {
            config.rng_seed = seed;
        }
        match self.determinism {
            Determinism::Strict => {
                if config.workers > 1 {
                    warn!("strict determinism: embedding workers {} -> 1", config.workers);
                }
                config.workers = 1;
            }
            Determinism::Fast => config.workers = config.workers.max(self.jobs),
        }
        config
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: &Path, format: Option<CorpusFormat>) -> Result<Vec<AnnotatedSentence>> {
    if !path.exists() {
        return Err(Error::data(format!("{}: no such file or directory", path.display())));
    }
    parse_semeval_corpus(path, format.unwrap_or_else(|| CorpusFormat::from_path(path)))
}

pub fn load_auxiliary(paths: &[PathBuf]) -> Result<Vec<TokenizedSentence>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_plain_text(p)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub sentences: usize,
    pub store: PathBuf,
    pub frequency: PathBuf,
}

/// Parses a corpus into `<out>/corpus/<name>.tsv` plus its frequency table.
pub fn cmd_ingest(input: &Path, format: Option<CorpusFormat>, name: &str, opts: &GlobalOptions) -> Result<IngestSummary> {
    let sentences = load_corpus(input, format)?;
    if sentences.is_empty() {
        warn!("{}: no sentences found", input.display());
    }
    let dir = opts.out_dir()?.join("corpus");
    let store = dir.join(format!("{name}.tsv"));
    let frequency = dir.join(format!("{name}.freq.tsv"));
    write(&store, write_tsv(&sentences)?)?;
    write(&frequency, build_frequency_table(&tokenize_all(&sentences)).to_tsv())?;
    info!("ingested {} sentences into {}", sentences.len(), store.display());
    Ok(IngestSummary {
        sentences: sentences.len(),
        store,
        frequency,
    })
}

/// Partition and quartile report of a stored corpus, written to `<out>/stats.txt`.
pub fn cmd_stats(store: &Path, n_parts: usize, opts: &GlobalOptions) -> Result<String> {
    let sentences = load_corpus(store, None)?;
    let table = build_frequency_table(&tokenize_all(&sentences));
    let drugs = build_drug_lexicon(&sentences).token_set();
    let report = stats_report(&table, n_parts, &drugs)?;
    write(&opts.out_dir()?.join("stats.txt"), &report)?;
    Ok(report)
}

/// Trains embeddings over corpora and auxiliary text into `<out>/embedding.txt`.
pub fn cmd_embed(
    corpora: &[PathBuf],
    auxiliary: &[PathBuf],
    config: CbowConfig,
    opts: &GlobalOptions,
) -> Result<PathBuf> {
    let mut sentences = Vec::new();
    for c in corpora {
        sentences.extend(tokenize_all(&load_corpus(c, None)?));
    }
    sentences.extend(load_auxiliary(auxiliary)?);
    let table = train_cbow(&sentences, &opts.embedding(config))?;
    let path = opts.out_dir()?.join("embedding.txt");
    table.save(&path)?;
    Ok(path)
}

fn representation_path(dir: &Path, name: &str, technique: Technique) -> PathBuf {
    match technique {
        Technique::Sequence => dir.join(format!("{name}.sequences.tsv")),
        _ => dir.join(format!("{name}.tuples.tsv")),
    }
}

/// Labels a corpus with its own lexicon and writes `<out>/<name>.tuples.tsv`
/// (or `.sequences.tsv` for technique 3).
pub fn cmd_represent(
    corpus: &Path,
    embedding: &Path,
    technique: Technique,
    block: DistanceBlock,
    name: &str,
    opts: &GlobalOptions,
) -> Result<PathBuf> {
    let sentences = load_corpus(corpus, None)?;
    let table = EmbeddingTable::load(embedding)?;
    let data = Representation::build(
        technique,
        block,
        &tokenize_all(&sentences),
        &table,
        &build_drug_lexicon(&sentences),
    );
    let path = representation_path(&opts.out_dir()?, name, technique);
    write(&path, data.to_text())?;
    info!("{} samples -> {}", data.len(), path.display());
    Ok(path)
}

/// Filters test tuples using token counts from the training corpus; writes
/// `<out>/selected.tuples.tsv` and `<out>/selection.json`.
pub fn cmd_select(
    tuples: &Path,
    train_corpus: &Path,
    strategy: SelectionStrategy,
    opts: &GlobalOptions,
) -> Result<PathBuf> {
    let data = read_tuples(&read(tuples)?, &tuples.display().to_string())?;
    let table: FrequencyTable = build_frequency_table(&tokenize_all(&load_corpus(train_corpus, None)?));
    let (selected, manifest) = apply_selection(&data, strategy, &table, opts.seed.unwrap_or(1))?;
    let dir = opts.out_dir()?;
    let path = dir.join("selected.tuples.tsv");
    write(&path, write_tuples(&selected))?;
    write(
        &dir.join("selection.json"),
        serde_json::to_string_pretty(&manifest).expect("serializable") + "\n",
    )?;
    Ok(path)
}

/// Trains a model on a tuple (or sequence, for LSTM) file; writes `<out>/model.ckpt`.
pub fn cmd_train(data: &Path, model: &ModelConfig, opts: &GlobalOptions) -> Result<PathBuf> {
    let model = match opts.seed {
        Some(seed) => model.with_seed(seed),
        None => model.clone(),
    };
    let technique = match model.kind() {
        ModelKind::Lstm => Technique::Sequence,
        _ => Technique::PerSentence,
    };
    let origin = data.display().to_string();
    let data = Representation::from_text(technique, &read(data)?, &origin)?;
    let trained = match (&model, &data) {
        (ModelConfig::Lstm(c), Representation::Sequences(s)) => TrainedModel::Lstm(lstm_train(s, c)?.0),
        (ModelConfig::Mlp(c), Representation::Tuples(t)) => TrainedModel::Tuple(mlp_train(t, c)?.0),
        (ModelConfig::Dbn(c), Representation::Tuples(t)) => TrainedModel::Tuple(dbn_train(t, c)?.0),
        (ModelConfig::Sae(c), Representation::Tuples(t)) => TrainedModel::Tuple(sae_train(t, c)?.0),
        _ => unreachable!("technique follows the model kind"),
    };
    let seed = opts.seed.unwrap_or(1);
    let config = serde_json::to_value(&model).expect("serializable");
    let path = opts.out_dir()?.join("model.ckpt");
    trained.to_checkpoint(seed, config).save(&path)?;
    Ok(path)
}

/// Scores a checkpoint on a tuple or sequence file against the gold names of
/// `gold_corpus`; writes `<out>/report.txt`.
pub fn cmd_evaluate(checkpoint: &Path, data: &Path, gold_corpus: &Path, opts: &GlobalOptions) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let origin = data.display().to_string();
    let text = read(data)?;
    let extracted = if ckpt.kind == ModelKind::Lstm {
        let model = ckpt.to_lstm()?;
        let Representation::Sequences(s) = Representation::from_text(Technique::Sequence, &text, &origin)? else {
            unreachable!()
        };
        sequences_to_nameset(&lstm_predict(&model, &s)?, &s)?
    } else {
        let model = ckpt.to_classifier()?;
        let tuples = read_tuples(&text, &origin)?;
        let classes: Vec<u8> = model.predict(&tuples)?.into_iter().map(|p| p.class).collect();
        tuples_to_nameset(&classes, &tuples)?
    };
    let report = score(&extracted, &gold_nameset(&load_corpus(gold_corpus, None)?));
    write(&opts.out_dir()?.join("report.txt"), report.to_text())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    /// Without a test corpus the training corpus is split by `train_fraction`.
    #[serde(default)]
    pub test: Option<PathBuf>,
    #[serde(default)]
    pub auxiliary: Vec<PathBuf>,
    #[serde(default)]
    pub format: Option<CorpusFormat>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

fn default_train_fraction() -> f64 {
    0.8
}

/// Pipeline config file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub technique: Technique,
    #[serde(default)]
    pub distance_block: DistanceBlock,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub embedding: CbowConfig,
    #[serde(default)]
    pub selection: SelectionStrategy,
    pub model: ModelConfig,
    #[serde(default)]
    pub cross_validation: Option<CvConfig>,
}

fn default_seed() -> u64 {
    1
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("pipeline config: {e}")))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.data.train);
        config.data.test.iter_mut().for_each(resolve);
        config.data.auxiliary.iter_mut().for_each(resolve);
        config.out.iter_mut().for_each(resolve);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path).map_err(|e| Error::config(e.to_string()))?;
        PipelineConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            technique: self.technique,
            selection: self.selection,
            model: self.model.clone(),
            embedding: self.embedding.clone(),
            distance_block: self.distance_block,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let paths = std::iter::once(&self.data.train)
            .chain(self.data.test.iter())
            .chain(self.data.auxiliary.iter());
        for p in paths {
            if !p.exists() {
                return Err(Error::config(format!("{}: no such file or directory", p.display())));
            }
        }
        self.scenario().validate()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub out: PathBuf,
    pub report: EvalReport,
    pub manifest: ScenarioManifest,
}

/// Runs one config end to end. Stage outputs are cached under `<out>/cache`
/// by content hash, so reruns only redo stages whose inputs changed.
pub fn run_pipeline(config: &PipelineConfig, out: &Path, opts: &GlobalOptions) -> Result<PipelineResult> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.embedding = opts.embedding(config.embedding);
    config.validate()?;
    let wrap = |stage: &'static str| move |e: Error| Error::Stage { stage, source: Box::new(e) };

    let corpus = load_corpus(&config.data.train, config.data.format).map_err(wrap("ingest"))?;
    let (train, test) = match &config.data.test {
        Some(path) => (corpus, load_corpus(path, config.data.format).map_err(wrap("ingest"))?),
        None => split_corpus(&corpus, config.data.train_fraction, config.seed).map_err(wrap("ingest"))?,
    };
    let auxiliary = load_auxiliary(&config.data.auxiliary).map_err(wrap("ingest"))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("corpus/train.tsv"), write_tsv(&train)?)?;
    write(&out.join("corpus/test.tsv"), write_tsv(&test)?)?;
    let table = build_frequency_table(&tokenize_all(&train));
    write(&out.join("corpus/train.freq.tsv"), table.to_tsv())?;
    if table.unique_tokens >= 3 {
        let drugs = build_drug_lexicon(&train).token_set();
        write(&out.join("stats.txt"), stats_report(&table, 3, &drugs)?)?;
    }

    let cache = ArtifactCache::new(out.join("cache"))?;
    let scenario = config.scenario();
    let outcome = run_scenario_cached(&train, &test, &auxiliary, &scenario, Some(&cache))?;

    outcome.embedding.save(&out.join("embedding.txt"))?;
    let technique = scenario.technique;
    write(&representation_path(out, "train", technique), outcome.train_data.to_text())?;
    write(&representation_path(out, "test", technique), outcome.test_data.to_text())?;
    outcome.checkpoint.save(&out.join("model.ckpt"))?;
    write(&out.join("report.txt"), outcome.report.to_text())?;
    write(&out.join("manifest.json"), outcome.manifest.to_json())?;

    if let Some(cv) = &config.cross_validation {
        let all: Vec<AnnotatedSentence> = train
            .iter()
            .chain(config.data.test.as_ref().map_or(&[][..], |_| &test[..]))
            .cloned()
            .collect();
        let result = cross_validate(&all, &auxiliary, &scenario, cv, opts.jobs).map_err(wrap("cross_validate"))?;
        write(&out.join("cross_validation.txt"), result.to_text())?;
    }
    info!("{}: F = {:.4}", out.display(), outcome.report.f_score);
    Ok(PipelineResult {
        out: out.to_path_buf(),
        report: outcome.report,
        manifest: outcome.manifest,
    })
}

/// Runs each config file, up to `jobs` at a time. With several configs each
/// gets `<out>/<file stem>` unless the file names its own `out`.
pub fn cmd_pipeline(configs: &[PathBuf], opts: &GlobalOptions) -> Result<Vec<PipelineResult>> {
    if configs.is_empty() {
        return Err(Error::config("pipeline needs at least one config file"));
    }
    let loaded = configs
        .iter()
        .map(|p| PipelineConfig::load(p))
        .collect::<Result<Vec<_>>>()?;
    let outs: Vec<PathBuf> = configs
        .iter()
        .zip(&loaded)
        .map(|(path, config)| match (&opts.out, &config.out) {
            (Some(out), _) if configs.len() == 1 => out.clone(),
            (Some(out), _) => out.join(path.file_stem().unwrap_or_default()),
            (None, Some(own)) => own.clone(),
            (None, None) if configs.len() == 1 => PathBuf::from(DEFAULT_OUT),
            (None, None) => PathBuf::from(DEFAULT_OUT).join(path.file_stem().unwrap_or_default()),
        })
        .collect();
    let jobs = opts.jobs.max(1);
    // fan-out jobs take one thread each
    let job_opts = GlobalOptions {
        jobs: if loaded.len() > 1 { 1 } else { jobs },
        ..opts.clone()
    };
    let mut results = Vec::with_capacity(loaded.len());
    let work: Vec<_> = loaded.iter().zip(&outs).collect();
    for chunk in work.chunks(jobs) {
        let chunk_results: Vec<Result<PipelineResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(config, out)| {
                    let job_opts = &job_opts;
                    scope.spawn(move || run_pipeline(config, out, job_opts))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("pipeline job panicked")).collect()
        });
        for r in chunk_results {
            results.push(r?);
        }
    }
    Ok(results)
}
