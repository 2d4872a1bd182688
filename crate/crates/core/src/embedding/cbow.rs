//! Continuous bag-of-words with negative sampling.

use std::collections::HashMap;

use log::warn;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{fallback_vector, EmbeddingTable, PAD_TOKEN};
use crate::corpus::{build_frequency_table, TokenizedSentence};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbowConfig {
    pub dimension: usize,
    /// Context tokens on each side of the center token.
    pub window: usize,
    pub epochs: usize,
    /// Initial rate; decays linearly to 1e-4 of its value over training.
    pub learning_rate: f32,
    pub negative_samples: usize,
    pub min_count: usize,
    pub rng_seed: u64,
    /// 1 trains as a single sequential writer. More than 1 trains sentence shards on
    /// parallel copies each epoch and averages them (faster, different result).
    pub workers: usize,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dimension: 100,
            window: 5,
            epochs: 5,
            learning_rate: 0.025,
            negative_samples: 5,
            min_count: 1,
            rng_seed: 1,
            workers: 1,
        }
    }
}

impl CbowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::config("embedding dimension must be positive"));
        }
        if self.window == 0 {
            return Err(Error::config("embedding window must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("embedding workers must be at least 1"));
        }
        Ok(())
    }
}

struct Weights {
    input: Vec<f32>,
    output: Vec<f32>,
}

struct Trainer<'a> {
    dim: usize,
    window: usize,
    negatives: usize,
    /// cumulative unigram^0.75 mass per vocabulary id
    noise_cdf: &'a [f64],
}

impl Trainer<'_> {
    fn sample_noise(&self, rng: &mut Rng) -> usize {
        let total = *self.noise_cdf.last().unwrap();
        let u = rng.random::<f64>() * total;
        self.noise_cdf.partition_point(|&c| c <= u).min(self.noise_cdf.len() - 1)
    }

    /// One pass over `sentences`; `lr_at` maps words processed so far to a rate.
    fn run_epoch(
        &self,
        w: &mut Weights,
        sentences: &[Vec<usize>],
        rng: &mut Rng,
        lr_at: impl Fn(usize) -> f32,
        mut processed: usize,
    ) {
        let dim = self.dim;
        let mut hidden = vec![0.0f32; dim];
        let mut grad = vec![0.0f32; dim];
        for sentence in sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let lr = lr_at(processed);
                processed += 1;
                let lo = pos.saturating_sub(self.window);
                let hi = (pos + self.window + 1).min(sentence.len());
                let context = (lo..hi).filter(|&j| j != pos).map(|j| sentence[j]);
                hidden.iter_mut().for_each(|h| *h = 0.0);
                let mut n_context = 0;
                for c in context.clone() {
                    let row = &w.input[c * dim..(c + 1) * dim];
                    hidden.iter_mut().zip(row).for_each(|(h, x)| *h += x);
                    n_context += 1;
                }
                if n_context == 0 {
                    continue;
                }
                let inv = 1.0 / n_context as f32;
                hidden.iter_mut().for_each(|h| *h *= inv);
                grad.iter_mut().for_each(|g| *g = 0.0);

                for k in 0..=self.negatives {
                    let (target, label) = if k == 0 {
                        (center, 1.0)
                    } else {
                        let t = self.sample_noise(rng);
                        if t == center {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let out = &mut w.output[target * dim..(target + 1) * dim];
                    let score: f32 = hidden.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                    let g = (label - sigmoid(score)) * lr;
                    for ((gr, o), h) in grad.iter_mut().zip(out.iter_mut()).zip(&hidden) {
                        *gr += g * *o;
                        *o += g * h;
                    }
                }
                for c in context {
                    let row = &mut w.input[c * dim..(c + 1) * dim];
                    row.iter_mut().zip(&grad).for_each(|(x, g)| *x += g);
                }
            }
        }
    }
}

fn sigmoid(x: f32) -> f32 {
    if x > 6.0 {
        1.0
    } else if x < -6.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Trains CBOW vectors over every sentence given (train, test and auxiliary text
/// alike). Tokens below `min_count` get a deterministic pseudo-random vector; the
/// pad token is never trained. Deterministic for a fixed config.
pub fn train_cbow(sentences: &[TokenizedSentence], config: &CbowConfig) -> Result<EmbeddingTable> {
    config.validate()?;
    let freq = build_frequency_table(sentences);
    let vocab: Vec<(&str, usize)> = freq
        .entries
        .iter()
        .filter(|e| e.token != PAD_TOKEN && e.count >= config.min_count)
        .map(|e| (e.token.as_str(), e.count))
        .collect();
    if vocab.is_empty() {
        return Err(Error::config("cannot train embeddings on an empty corpus"));
    }
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.tokens.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect())
        .collect();

    let mut noise_cdf = Vec::with_capacity(vocab.len());
    let mut acc = 0.0f64;
    for (_, count) in &vocab {
        acc += (*count as f64).powf(0.75);
        noise_cdf.push(acc);
    }

    let dim = config.dimension;
    let mut init_rng = rng::derive(config.rng_seed, "cbow.init");
    let mut weights = Weights {
        input: (0..vocab.len() * dim)
            .map(|_| (init_rng.random::<f32>() - 0.5) / dim as f32)
            .collect(),
        output: vec![0.0; vocab.len() * dim],
    };
    let trainer = Trainer {
        dim,
        window: config.window,
        negatives: config.negative_samples,
        noise_cdf: &noise_cdf,
    };

    let words_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * config.epochs).max(1) as f32;
    let lr0 = config.learning_rate;
    let lr_at = |done: usize| lr0 * (1.0 - done as f32 / (total_words + 1.0)).max(1e-4);

    for epoch in 0..config.epochs {
        let base = epoch * words_per_epoch;
        if config.workers <= 1 || encoded.len() < config.workers {
            let mut rng = rng::derive(config.rng_seed, &format!("cbow.epoch.{epoch}"));
            trainer.run_epoch(&mut weights, &encoded, &mut rng, lr_at, base);
        } else {
            weights = train_sharded(&trainer, &weights, &encoded, config, epoch, base, &lr_at);
        }
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, (token, _)) in vocab.iter().enumerate() {
        table.insert(*token, &weights.input[i * dim..(i + 1) * dim])?;
    }
    let mut rare = 0;
    for entry in &freq.entries {
        if entry.token != PAD_TOKEN && !table.contains(&entry.token) {
            table.insert(entry.token.clone(), &fallback_vector(&entry.token, dim))?;
            rare += 1;
        }
    }
    if rare > 0 {
        warn!("{rare} tokens below min_count {} received untrained vectors", config.min_count);
    }
    Ok(table)
}

fn train_sharded(
    trainer: &Trainer<'_>,
    weights: &Weights,
    encoded: &[Vec<usize>],
    config: &CbowConfig,
    epoch: usize,
    base: usize,
    lr_at: &(dyn Fn(usize) -> f32 + Sync),
) -> Weights {
    let shard_len = encoded.len().div_ceil(config.workers);
    let shards: Vec<&[Vec<usize>]> = encoded.chunks(shard_len).collect();
    let results: Vec<Weights> = std::thread::scope(|scope| {
        let handles: Vec<_> = shards
            .iter()
            .enumerate()
            .map(|(s, shard)| {
                let mut local = Weights {
                    input: weights.input.clone(),
                    output: weights.output.clone(),
                };
                scope.spawn(move || {
                    let mut rng = rng::derive(config.rng_seed, &format!("cbow.epoch.{epoch}.shard.{s}"));
                    let scaled = |done: usize| lr_at(base + (done - base) * config.workers);
                    trainer.run_epoch(&mut local, shard, &mut rng, scaled, base);
                    local
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("cbow worker panicked")).collect()
    });
    let n = results.len() as f32;
    let mut merged = Weights {
        input: vec![0.0; weights.input.len()],
        output: vec![0.0; weights.output.len()],
    };
    for r in &results {
        merged.input.iter_mut().zip(&r.input).for_each(|(m, x)| *m += x / n);
        merged.output.iter_mut().zip(&r.output).for_each(|(m, x)| *m += x / n);
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine;

    fn corpus(lines: &[&str], repeat: usize) -> Vec<TokenizedSentence> {
        (0..repeat)
            .flat_map(|r| {
                lines
                    .iter()
                    .enumerate()
                    .map(move |(i, l)| TokenizedSentence::from_text(format!("{r}.{i}"), l))
            })
            .collect()
    }

    fn small_config() -> CbowConfig {
        CbowConfig {
            dimension: 16,
            window: 2,
            epochs: 20,
            learning_rate: 0.05,
            negative_samples: 5,
            min_count: 1,
            rng_seed: 11,
            workers: 1,
        }
    }

    #[test]
    fn every_vector_has_configured_width() {
        let sents = corpus(&["a b c d", "b c d e f"], 3);
        let table = train_cbow(&sents, &CbowConfig { epochs: 1, ..CbowConfig::default() }).unwrap();
        assert_eq!(table.len(), 6);
        assert!(table.iter().all(|(_, v)| v.len() == 100));
    }

    #[test]
    fn empty_corpus_is_config_error() {
        assert!(matches!(train_cbow(&[], &CbowConfig::default()), Err(Error::Config(_))));
        let blank = vec![TokenizedSentence::new("x", vec![])];
        assert!(train_cbow(&blank, &CbowConfig::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let sents = corpus(&["the dose of aspirin", "warfarin and aspirin interact"], 5);
        let a = train_cbow(&sents, &small_config()).unwrap();
        let b = train_cbow(&sents, &small_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rare_tokens_get_untrained_vectors_and_pad_is_skipped() {
        let mut sents = corpus(&["a b c a b c"], 2);
        sents.push(TokenizedSentence::from_text("r", "zeta * a"));
        let cfg = CbowConfig { min_count: 2, ..small_config() };
        let table = train_cbow(&sents, &cfg).unwrap();
        assert!(!table.contains(PAD_TOKEN));
        assert_eq!(table.get("zeta").unwrap(), fallback_vector("zeta", 16).as_slice());
    }

    #[test]
    fn shared_contexts_pull_vectors_together() {
        // x1/x2 only ever appear between p and q; y1/y2 only between r and s
        let lines = [
            "p p x1 q q", "p p x2 q q", "r r y1 s s", "r r y2 s s",
        ];
        let sents = corpus(&lines, 60);
        let table = train_cbow(&sents, &small_config()).unwrap();
        let v = |t| table.get(t).unwrap();
        let same = cosine(v("x1"), v("x2")).unwrap();
        let cross = cosine(v("x1"), v("y1")).unwrap();
        assert!(same > cross, "same-context {same} vs cross-context {cross}");
    }

    #[test]
    fn sharded_training_runs_and_keeps_shape() {
        let sents = corpus(&["a b c d", "b c d e f", "e f g"], 10);
        let cfg = CbowConfig { workers: 3, ..small_config() };
        let a = train_cbow(&sents, &cfg).unwrap();
        let b = train_cbow(&sents, &cfg).unwrap();
        assert_eq!(a.len(), 7);
        assert_eq!(a, b);
    }
}
