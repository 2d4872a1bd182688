//! Generated corpora for tests, examples and benchmarks.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::corpus::{AnnotatedSentence, EntityKind};
use crate::error::Result;
use crate::eval::EvalReport;
use crate::models::{train_network, Activation, Loss, Network, Objective, TrainOptions};
use crate::representation::{SequenceSample, SequenceStep};
use crate::rng;

const FILLER: &[&str] = &[
    "the", "patient", "was", "given", "with", "of", "and", "in", "to", "dose", "daily", "mg", "treatment", "effect",
    "may", "increase", "decrease", "plasma", "levels", "when", "is", "a", "should", "be", "used", "caution",
    "clinical", "studies", "showed", "no", "interaction", "between", "after", "oral", "administration", "for",
    "patients", "receiving", "concomitant", "therapy",
];

const SYLLABLES: &[&str] = &[
    "zo", "ra", "fen", "tin", "mab", "pril", "cil", "lo", "xa", "vir", "dol", "ine", "ko", "sar", "tan", "mid",
];

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub sentences: Vec<AnnotatedSentence>,
    /// Every planted name, as lowercase tokens.
    pub drugs: Vec<Vec<String>>,
}

fn pseudo_word(rng: &mut rng::Rng) -> String {
    let n = rng.random_range(2..=4);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

/// Drug names of 1 to 5 tokens. Some names extend shorter ones, so a
/// matcher has to prefer the longest entry.
pub fn drug_names(n: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = rng::derive(seed, "synthetic.drugs");
    let mut names: Vec<Vec<String>> = Vec::with_capacity(n);
    while names.len() < n {
        let name = match names.choose(&mut rng) {
            Some(base) if base.len() < 5 && rng.random_bool(0.3) => {
                let mut longer = base.clone();
                longer.push(pseudo_word(&mut rng));
                longer
            }
            _ => (0..rng.random_range(1..=5)).map(|_| pseudo_word(&mut rng)).collect(),
        };
        if !names.contains(&name) {
            names.push(name);
        }
    }
    names
}

/// Filler sentences of 3 to 20 words with 0 to 2 planted drug names each.
/// Names are annotated as `drug` with exact character offsets and may appear
/// with a leading capital.
pub fn planted_corpus(n_sentences: usize, n_drugs: usize, seed: u64) -> PlantedCorpus {
    let drugs = drug_names(n_drugs, seed);
    let mut rng = rng::derive(seed, "synthetic.sentences");
    let mut sentences = Vec::with_capacity(n_sentences);
    for s in 0..n_sentences {
        let mut words: Vec<(String, bool)> = (0..rng.random_range(3..=20))
            .map(|_| (FILLER.choose(&mut rng).unwrap().to_string(), false))
            .collect();
        let mut spans: Vec<(usize, usize)> = Vec::new();
        for _ in 0..rng.random_range(0..=2) {
            let name = drugs.choose(&mut rng).unwrap();
            let at = rng.random_range(0..=words.len());
            // keep earlier spans intact
            if spans.iter().any(|&(a, b)| at > a && at < b) {
                continue;
            }
            for span in &mut spans {
                if span.0 >= at {
                    span.0 += name.len();
                    span.1 += name.len();
                }
            }
            for (k, tok) in name.iter().enumerate() {
                let mut tok = tok.clone();
                if k == 0 && rng.random_bool(0.2) {
                    tok[..1].make_ascii_uppercase();
                }
                words.insert(at + k, (tok, true));
            }
            spans.push((at, at + name.len()));
        }
        let mut text = String::new();
        let mut starts = Vec::with_capacity(words.len());
        for (i, (w, _)) in words.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            starts.push(text.chars().count());
            text.push_str(w);
        }
        let mut sentence = AnnotatedSentence {
            id: format!("syn.s{s}"),
            text,
            annotations: Vec::new(),
        };
        spans.sort_unstable();
        for (a, b) in spans {
            let end = starts[b - 1] + words[b - 1].0.chars().count() - 1;
            let ann = sentence
                .annotate(starts[a], end, EntityKind::Drug)
                .expect("generated offsets are in range");
            sentence.annotations.push(ann);
        }
        sentences.push(sentence);
    }
    PlantedCorpus { sentences, drugs }
}

/// Sequences whose step label is 1 exactly when the previous step's first
/// feature is positive (probability 0.3). Features carry nothing about the
/// previous step, so a per-step classifier cannot beat the base rate.
pub fn memory_task(n_sentences: usize, dimension: usize, seed: u64) -> Vec<SequenceSample> {
    let mut rng = rng::derive(seed, "synthetic.memory");
    (0..n_sentences)
        .map(|s| {
            let len = rng.random_range(5..=15);
            let mut previous_positive = false;
            let steps = (0..len)
                .map(|_| {
                    let mut features: Vec<f32> = (0..dimension).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let positive = rng.random_bool(0.3);
                    let magnitude = rng.random_range(0.2f32..1.0);
                    features[0] = if positive { magnitude } else { -magnitude };
                    let step = SequenceStep {
                        token: if positive { "pos" } else { "neg" }.to_string(),
                        features,
                        label: previous_positive as u8,
                    };
                    previous_positive = positive;
                    step
                })
                .collect();
            SequenceSample {
                sentence_id: format!("mem.s{s}"),
                steps,
            }
        })
        .collect()
}

/// Token-level precision, recall and F of the positive class.
pub fn token_report(predictions: &[Vec<u8>], sequences: &[SequenceSample]) -> EvalReport {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (pred, seq) in predictions.iter().zip(sequences) {
        for (&p, step) in pred.iter().zip(&seq.steps) {
            match (p == 1, step.label == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    EvalReport::from_counts(tp, fp, fn_)
}

/// Logistic regression on each step's features alone.
pub fn train_memoryless(sequences: &[SequenceSample], epochs: usize, seed: u64) -> Result<Network> {
    let steps: Vec<&SequenceStep> = sequences.iter().flat_map(|s| &s.steps).collect();
    let width = steps.first().map_or(1, |s| s.features.len());
    let inputs = Array2::from_shape_fn((steps.len(), width), |(i, j)| steps[i].features[j] as f64);
    let targets = Array2::from_shape_fn((steps.len(), 1), |(i, _)| steps[i].label as f64);
    let mut rng = rng::derive(seed, "synthetic.memoryless");
    let mut net = Network::new(&[width, 1], Activation::Sigmoid, Activation::Sigmoid, &mut rng)?;
    let options = TrainOptions {
        learning_rate: 0.5,
        momentum: 0.5,
        epochs,
        batch_size: 100,
        objective: Objective {
            loss: Loss::CrossEntropy,
            lambda: 0.0,
            sparsity: None,
        },
        corruption: 0.0,
        frozen_layers: 0,
    };
    train_network(&mut net, inputs.view(), targets.view(), &options, &mut rng)?;
    Ok(net)
}

pub fn predict_memoryless(net: &Network, sequences: &[SequenceSample]) -> Vec<Vec<u8>> {
    sequences
        .iter()
        .map(|s| {
            let width = net.input_width();
            let x = Array2::from_shape_fn((s.len(), width), |(i, j)| s.steps[i].features[j] as f64);
            net.forward(x.view()).column(0).iter().map(|&p| (p >= 0.5) as u8).collect()
        })
        .collect()
}
