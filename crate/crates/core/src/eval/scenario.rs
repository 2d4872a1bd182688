use std::collections::BTreeMap;

use log::info;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{gold_nameset, score, sequences_to_nameset, tuples_to_nameset, EvalReport, NameSet};
use crate::corpus::{build_frequency_table, tokenize_all, AnnotatedSentence, TokenizedSentence};
use crate::embedding::{train_cbow, CbowConfig, EmbeddingTable};
use crate::error::{Error, Result};
use crate::models::checkpoint::Checkpoint;
use crate::models::{
    dbn_train, lstm_predict, lstm_train, mlp_train, sae_train, DbnConfig, LstmConfig, LstmModel, MlpConfig, ModelKind,
    SaeConfig, TrainReport, TupleClassifier,
};
use crate::pipeline::ArtifactCache;
use crate::representation::{
    build_drug_lexicon, read_sequences, read_tuples, technique1_tuples, technique2_tuples, technique3_sequences_with, DistanceBlock, DrugLexicon,
    write_sequences, write_tuples, SequenceSample, Technique, TupleSample, TUPLE_WIDTH,
};
use crate::selection::{apply_selection, SelectionManifest, SelectionStrategy};
use crate::{rng, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Mlp(MlpConfig),
    Dbn(DbnConfig),
    Sae(SaeConfig),
    Lstm(LstmConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Mlp(_) => ModelKind::Mlp,
            ModelConfig::Dbn(_) => ModelKind::Dbn,
            ModelConfig::Sae(_) => ModelKind::Sae,
            ModelConfig::Lstm(_) => ModelKind::Lstm,
        }
    }

    fn input_width(&self) -> usize {
        match self {
            ModelConfig::Mlp(c) => c.layer_sizes.first().copied().unwrap_or(0),
            ModelConfig::Dbn(c) => c.rbm_sizes.first().map_or(0, |s| s.0),
            ModelConfig::Sae(c) => c.input_width,
            ModelConfig::Lstm(c) => c.input_dimension,
        }
    }

    /// Copy with every model seed replaced by `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ModelConfig::Mlp(m) => m.rng_seed = seed,
            ModelConfig::Dbn(m) => {
                m.rng_seed = seed;
                m.rbm.rng_seed = seed;
            }
            ModelConfig::Sae(m) => m.rng_seed = seed,
            ModelConfig::Lstm(m) => m.rng_seed = seed,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub technique: Technique,
    #[serde(default)]
    pub selection: SelectionStrategy,
    pub model: ModelConfig,
    #[serde(default)]
    pub embedding: CbowConfig,
    #[serde(default)]
    pub distance_block: DistanceBlock,
    /// Seeds embedding training, clustering and model initialization.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

impl ScenarioConfig {
    /// Checks the technique/model/selection combination and layer widths.
    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        let lstm = self.model.kind() == ModelKind::Lstm;
        match self.technique {
            Technique::Sequence if !lstm => {
                return Err(Error::config("technique 3 produces sequences and needs the lstm model"));
            }
            Technique::Sequence if self.selection != SelectionStrategy::All => {
                return Err(Error::config(
                    "technique 3 keeps whole sentences; candidate selection must be `all`",
                ));
            }
            Technique::GlobalStream | Technique::PerSentence if lstm => {
                return Err(Error::config("the lstm model needs technique 3 sequences"));
            }
            _ => {}
        }
        let expected = match self.technique {
            Technique::Sequence => 2 * self.embedding.dimension,
            _ => TUPLE_WIDTH * self.embedding.dimension,
        };
        if self.model.input_width() != expected {
            return Err(Error::config(format!(
                "{} input width is {} but technique {} with dimension {} yields {expected}",
                self.model.kind(),
                self.model.input_width(),
                self.technique,
                self.embedding.dimension
            )));
        }
        self.embedding.validate()
    }

    fn seeded(&self) -> (CbowConfig, ModelConfig) {
        let embedding = CbowConfig {
            rng_seed: self.seed,
            ..self.embedding.clone()
        };
        (embedding, self.model.with_seed(self.seed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Tuple(TupleClassifier),
    Lstm(LstmModel),
}

impl TrainedModel {
    pub fn to_checkpoint(&self, seed: u64, config: serde_json::Value) -> Checkpoint {
        match self {
            TrainedModel::Tuple(m) => Checkpoint::from_classifier(m, seed, config),
            TrainedModel::Lstm(m) => Checkpoint::from_lstm(m, seed, config),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioManifest {
    pub config: ScenarioConfig,
    pub counts: BTreeMap<String, usize>,
    pub selection: Option<SelectionManifest>,
    /// SHA-256 of the inputs and the trained embedding.
    pub checksums: BTreeMap<String, String>,
    pub report: EvalReport,
}

impl ScenarioManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable manifest") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: EvalReport,
    pub manifest: ScenarioManifest,
    pub embedding: EmbeddingTable,
    pub model: TrainedModel,
    pub checkpoint: Checkpoint,
    /// Empty when the model came from the cache.
    pub train_report: TrainReport,
    pub train_data: Representation,
    /// Test data after selection.
    pub test_data: Representation,
    pub extracted: NameSet,
    pub gold: NameSet,
}

fn corpus_checksum(sentences: &[AnnotatedSentence]) -> String {
    sha256_hex(serde_json::to_string(sentences).expect("serializable corpus").as_bytes())
}

/// Tuples (techniques 1 and 2) or per-sentence sequences (technique 3).
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    Tuples(Vec<TupleSample>),
    Sequences(Vec<SequenceSample>),
}

impl Representation {
    pub fn build(
        technique: Technique,
        block: DistanceBlock,
        sentences: &[TokenizedSentence],
        table: &EmbeddingTable,
        lexicon: &DrugLexicon,
    ) -> Self {
        match technique {
            Technique::GlobalStream => Representation::Tuples(technique1_tuples(sentences, table, lexicon)),
            Technique::PerSentence => Representation::Tuples(technique2_tuples(sentences, table, lexicon)),
            Technique::Sequence => {
                Representation::Sequences(technique3_sequences_with(sentences, table, lexicon, block))
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Representation::Tuples(t) => t.len(),
            Representation::Sequences(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_text(&self) -> String {
        match self {
            Representation::Tuples(t) => write_tuples(t),
            Representation::Sequences(s) => write_sequences(s),
        }
    }

    pub fn from_text(technique: Technique, text: &str, origin: &str) -> Result<Self> {
        Ok(match technique {
            Technique::Sequence => Representation::Sequences(read_sequences(text, origin)?),
            _ => Representation::Tuples(read_tuples(text, origin)?),
        })
    }
}

fn stage<T>(name: &'static str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Runs `compute` directly, or through the cache when one is given. Cached
/// values always go through `decode` so hits and misses yield the same value.
fn cached<T>(
    cache: Option<&ArtifactCache>,
    name: &'static str,
    key: &str,
    compute: impl FnOnce() -> Result<T>,
    encode: impl Fn(&T) -> Vec<u8>,
    decode: impl Fn(&[u8]) -> Result<T>,
) -> Result<T> {
    stage(
        name,
        match cache {
            None => compute(),
            Some(cache) => cache.fetch(name, key, || compute().map(|v| encode(&v))).and_then(|b| decode(&b)),
        },
    )
}

fn utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::data(format!("cached artifact is not UTF-8: {e}")))
}

/// Trains embeddings on train + test + auxiliary text, builds the chosen
/// representation, labels training data with the training lexicon, trains the
/// model and scores extracted names against the test gold set.
pub fn run_scenario(
    train: &[AnnotatedSentence],
    test: &[AnnotatedSentence],
    auxiliary: &[TokenizedSentence],
    config: &ScenarioConfig,
) -> Result<ScenarioOutcome> {
    run_scenario_cached(train, test, auxiliary, config, None)
}

pub(crate) fn run_scenario_cached(
    train: &[AnnotatedSentence],
    test: &[AnnotatedSentence],
    auxiliary: &[TokenizedSentence],
    config: &ScenarioConfig,
    cache: Option<&ArtifactCache>,
) -> Result<ScenarioOutcome> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::data("scenario needs non-empty train and test corpora"));
    }
    let (embedding_config, model_config) = config.seeded();
    let train_tokens = tokenize_all(train);
    let test_tokens = tokenize_all(test);

    let mut checksums = BTreeMap::new();
    checksums.insert("train".to_string(), corpus_checksum(train));
    checksums.insert("test".to_string(), corpus_checksum(test));
    checksums.insert(
        "auxiliary".to_string(),
        sha256_hex(serde_json::to_string(auxiliary).expect("serializable").as_bytes()),
    );
    let json = |v: &dyn erased::Json| v.json();

    let embed_key = ArtifactCache::key(&[
        checksums["train"].as_bytes(),
        checksums["test"].as_bytes(),
        checksums["auxiliary"].as_bytes(),
        json(&embedding_config).as_bytes(),
    ]);
    let table = cached(
        cache,
        "embed",
        &embed_key,
        || {
            let mut corpus = train_tokens.clone();
            corpus.extend(test_tokens.iter().cloned());
            corpus.extend(auxiliary.iter().cloned());
            train_cbow(&corpus, &embedding_config)
        },
        |t| t.to_text().into_bytes(),
        |b| EmbeddingTable::from_text(utf8(b)?),
    )?;
    checksums.insert("embedding".to_string(), sha256_hex(table.to_text().as_bytes()));

    let train_lexicon = build_drug_lexicon(train);
    let test_lexicon = build_drug_lexicon(test);
    let frequencies = build_frequency_table(&train_tokens);
    let gold = gold_nameset(test);

    let represent_key = |side: &str| {
        ArtifactCache::key(&[
            embed_key.as_bytes(),
            side.as_bytes(),
            checksums[side].as_bytes(),
            json(&config.technique).as_bytes(),
            json(&config.distance_block).as_bytes(),
        ])
    };
    let represent = |side: &str, tokens: &[TokenizedSentence], lexicon: &DrugLexicon| {
        cached(
            cache,
            "represent",
            &represent_key(side),
            || Ok(Representation::build(config.technique, config.distance_block, tokens, &table, lexicon)),
            |r| r.to_text().into_bytes(),
            |b| Representation::from_text(config.technique, utf8(b)?, side),
        )
    };
    let train_data = represent("train", &train_tokens, &train_lexicon)?;
    let all_test = represent("test", &test_tokens, &test_lexicon)?;

    let mut counts = BTreeMap::new();
    counts.insert("train_sentences".to_string(), train.len());
    counts.insert("test_sentences".to_string(), test.len());
    counts.insert("auxiliary_sentences".to_string(), auxiliary.len());
    counts.insert("train_tokens".to_string(), frequencies.total_tokens);
    counts.insert("train_unique_tokens".to_string(), frequencies.unique_tokens);
    counts.insert("embedding_vocabulary".to_string(), table.len());
    counts.insert("train_lexicon".to_string(), train_lexicon.len());
    counts.insert("test_lexicon".to_string(), test_lexicon.len());
    counts.insert("gold_names".to_string(), gold.len());
    counts.insert("train_samples".to_string(), train_data.len());
    counts.insert("test_samples".to_string(), all_test.len());
    if let Representation::Tuples(t) = &train_data {
        counts.insert("train_drug_tuples".to_string(), t.iter().filter(|t| t.label > 1).count());
    }

    let (test_data, selection_manifest) = match &all_test {
        Representation::Tuples(tuples) => {
            let (selected, manifest) =
                stage("select", apply_selection(tuples, config.selection, &frequencies, config.seed))?;
            info!(
                "selection {}: {} of {} test tuples kept",
                config.selection, manifest.tuples_after, manifest.tuples_before
            );
            (Representation::Tuples(selected), Some(manifest))
        }
        Representation::Sequences(_) => (all_test.clone(), None),
    };

    let train_key = ArtifactCache::key(&[
        represent_key("train").as_bytes(),
        json(&model_config).as_bytes(),
    ]);
    let config_echo = serde_json::to_value(&model_config).expect("serializable config");
    let mut train_report = TrainReport::default();
    let checkpoint = cached(
        cache,
        "train",
        &train_key,
        || {
            let model = match (&model_config, &train_data) {
                (ModelConfig::Lstm(c), Representation::Sequences(s)) => {
                    let (m, r) = lstm_train(s, c)?;
                    train_report = r;
                    TrainedModel::Lstm(m)
                }
                (c, Representation::Tuples(t)) => {
                    let (m, r) = match c {
                        ModelConfig::Mlp(c) => mlp_train(t, c)?,
                        ModelConfig::Dbn(c) => dbn_train(t, c)?,
                        ModelConfig::Sae(c) => sae_train(t, c)?,
                        ModelConfig::Lstm(_) => unreachable!("validated composition"),
                    };
                    train_report = r;
                    TrainedModel::Tuple(m)
                }
                _ => unreachable!("validated composition"),
            };
            Ok(model.to_checkpoint(config.seed, config_echo.clone()))
        },
        |c| {
            let mut bytes = Vec::new();
            c.write_binary(&mut bytes).expect("in-memory write");
            bytes
        },
        |b| Checkpoint::read(b, true),
    )?;
    // evaluate the persisted (f32) weights so cached and fresh runs agree
    let model = stage(
        "train",
        match checkpoint.kind {
            ModelKind::Lstm => checkpoint.to_lstm().map(TrainedModel::Lstm),
            _ => checkpoint.to_classifier().map(TrainedModel::Tuple),
        },
    )?;
    let extracted = stage(
        "evaluate",
        match (&model, &test_data) {
            (TrainedModel::Lstm(m), Representation::Sequences(s)) => {
                lstm_predict(m, s).and_then(|p| sequences_to_nameset(&p, s))
            }
            (TrainedModel::Tuple(m), Representation::Tuples(t)) => m
                .predict(t)
                .and_then(|p| tuples_to_nameset(&p.iter().map(|p| p.class).collect::<Vec<_>>(), t)),
            _ => unreachable!("validated composition"),
        },
    )?;
    let report = score(&extracted, &gold);
    counts.insert("extracted_names".to_string(), extracted.len());

    let manifest = ScenarioManifest {
        config: config.clone(),
        counts,
        selection: selection_manifest,
        checksums,
        report,
    };
    Ok(ScenarioOutcome {
        report,
        manifest,
        embedding: table,
        model,
        checkpoint,
        train_report,
        train_data,
        test_data,
        extracted,
        gold,
    })
}

mod erased {
    pub trait Json {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> String {
            serde_json::to_string(self).expect("serializable")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k_runs: usize,
    pub train_fraction: f64,
    /// Per-run split seeds; when shorter than `k_runs` the rest are `base + i`.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_runs: 10,
            train_fraction: 0.8,
            seeds: Vec::new(),
        }
    }
}

impl CvConfig {
    fn seed(&self, run: usize, base: u64) -> u64 {
        self.seeds.get(run).copied().unwrap_or(base.wrapping_add(run as u64))
    }
}

/// Random split; a fraction of 1 (or more) trains and tests on the whole corpus.
pub fn split_corpus(
    corpus: &[AnnotatedSentence],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<AnnotatedSentence>, Vec<AnnotatedSentence>)> {
    if !(train_fraction > 0.0) {
        return Err(Error::config("train_fraction must be positive"));
    }
    if train_fraction >= 1.0 {
        return Ok((corpus.to_vec(), corpus.to_vec()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng::derive(seed, "cv.split"));
    let n_train = ((corpus.len() as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train >= corpus.len() {
        return Err(Error::data(format!(
            "a {train_fraction} split of {} sentences leaves an empty side",
            corpus.len()
        )));
    }
    let (a, b) = order.split_at(n_train);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((
        a.into_iter().map(|i| corpus[i].clone()).collect(),
        b.into_iter().map(|i| corpus[i].clone()).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count().max(1) as f64;
        Aggregate {
            mean: values.clone().sum::<f64>() / n,
            min: values.clone().fold(f64::INFINITY, f64::min),
            max: values.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub seeds: Vec<u64>,
    pub runs: Vec<EvalReport>,
    pub precision: Aggregate,
    pub recall: Aggregate,
    pub f_score: Aggregate,
}

impl CrossValidation {
    pub fn to_text(&self) -> String {
        let mut out = String::from("run\tseed\tprecision\trecall\tf_score\n");
        for (i, (r, s)) in self.runs.iter().zip(&self.seeds).enumerate() {
            out.push_str(&format!("{}\t{s}\t{:.4}\t{:.4}\t{:.4}\n", i + 1, r.precision, r.recall, r.f_score));
        }
        for (label, pick) in [("mean", 0), ("min", 1), ("max", 2)] {
            let get = |a: &Aggregate| [a.mean, a.min, a.max][pick];
            out.push_str(&format!(
                "{label}\t-\t{:.4}\t{:.4}\t{:.4}\n",
                get(&self.precision),
                get(&self.recall),
                get(&self.f_score)
            ));
        }
        out
    }
}

/// Repeated random train/test splits; runs execute on up to `jobs` threads and
/// results are reported in run order.
pub fn cross_validate(
    corpus: &[AnnotatedSentence],
    auxiliary: &[TokenizedSentence],
    config: &ScenarioConfig,
    cv: &CvConfig,
    jobs: usize,
) -> Result<CrossValidation> {
    if cv.k_runs == 0 {
        return Err(Error::config("cross-validation needs at least one run"));
    }
    config.validate()?;
    let seeds: Vec<u64> = (0..cv.k_runs).map(|i| cv.seed(i, config.seed)).collect();
    let run = |seed: u64| -> Result<EvalReport> {
        let (train, test) = split_corpus(corpus, cv.train_fraction, seed)?;
        let run_config = ScenarioConfig {
            seed,
            ..config.clone()
        };
        Ok(run_scenario(&train, &test, auxiliary, &run_config)?.report)
    };
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<EvalReport>>> = (0..seeds.len()).map(|_| None).collect();
    for chunk_start in (0..seeds.len()).step_by(jobs) {
        let chunk = &seeds[chunk_start..(chunk_start + jobs).min(seeds.len())];
        let outputs: Vec<Result<EvalReport>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|&s| scope.spawn(move || run(s))).collect();
            handles.into_iter().map(|h| h.join().expect("cross-validation run panicked")).collect()
        });
        for (i, out) in outputs.into_iter().enumerate() {
            results[chunk_start + i] = Some(out);
        }
    }
    let runs = results.into_iter().map(|r| r.expect("every run executed")).collect::<Result<Vec<_>>>()?;
    Ok(CrossValidation {
        precision: Aggregate::of(runs.iter().map(|r| r.precision)),
        recall: Aggregate::of(runs.iter().map(|r| r.recall)),
        f_score: Aggregate::of(runs.iter().map(|r| r.f_score)),
        seeds,
        runs,
    })
}
