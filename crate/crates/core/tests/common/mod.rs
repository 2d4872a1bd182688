//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use drugner::corpus::{parse_tsv, AnnotatedSentence, TokenizedSentence};
use drugner::rng;
use rand::Rng as _;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn load(name: &str) -> Vec<AnnotatedSentence> {
    parse_tsv(&fixture(name)).unwrap()
}

fn words(row: &str) -> Vec<String> {
    row.split(' ').map(String::from).collect()
}

/// Global-stream windows of the three-sentence sample at stream offsets
/// 0, 1, 2, 3, 6, 10 and 11 with their labels.
pub fn sample_stream_rows() -> Vec<(usize, Vec<String>, u8)> {
    [
        (0, "modification of surface histidine residues", 1),
        (1, "of surface histidine residues abolishes", 1),
        (2, "surface histidine residues abolishes the", 1),
        (3, "histidine residues abolishes the cytotoxic", 1),
        (6, "the cytotoxic activity of clostridium", 1),
        (10, "clostridium difficile toxin a antimicrobial", 5),
        (11, "difficile toxin a antimicrobial activity", 1),
    ]
    .into_iter()
    .map(|(i, row, label)| (i, words(row), label))
    .collect()
}

/// Labeled tuples that must appear in the global stream of
/// `labeled_tuples_sample.tsv`.
pub fn labeled_tuple_rows() -> Vec<(Vec<String>, u8)> {
    [
        ("plenaxis were performed cytochrome p-450", 2),
        ("testosterone concentrations just prior to", 2),
        ("beta-adrenergic antagonists and alpha-adrenergic stimulants,", 3),
        ("carbonic anhydrase inhibitors, concomitant use", 3),
        ("sodium polystyrene sulfonate should be", 4),
        ("sodium acid phosphate such as", 4),
        ("clostridium difficile toxin a -", 5),
        ("nonsteroidal anti inflammatory drugs and", 5),
        ("casein phosphopeptide-amorphous calcium phosphate complex", 6),
        ("studies with plenaxis were performed.", 1),
        ("were performed. cytochrome p-450 is", 1),
    ]
    .into_iter()
    .map(|(row, label)| (words(row), label))
    .collect()
}

/// Per-sentence windows of the first sample sentence (14 tokens) at offsets
/// 0, 1, 2, 3, 6, 10, 11, 12 and 13.
pub fn sample_sentence_rows() -> Vec<(usize, Vec<String>, u8)> {
    [
        (0, "modification of surface histidine residues", 1),
        (1, "of surface histidine residues abolishes", 1),
        (2, "surface histidine residues abolishes the", 1),
        (3, "histidine residues abolishes the cytotoxic", 1),
        (6, "the cytotoxic activity of clostridium", 1),
        (10, "clostridium difficile toxin a *", 5),
        (11, "difficile toxin a * *", 1),
        (12, "toxin a * * *", 1),
        (13, "a * * * *", 1),
    ]
    .into_iter()
    .map(|(i, row, label)| (i, words(row), label))
    .collect()
}

/// Tokens and per-token labels of `sequence_sample.tsv`.
pub fn sequence_rows() -> Vec<(Vec<String>, Vec<u8>)> {
    vec![
        (
            words("drug interaction studies with plenaxis were performed"),
            vec![0, 0, 0, 0, 1, 0, 0],
        ),
        (words("cytochrome p-450 is not known in the"), vec![1, 1, 0, 0, 0, 0, 0]),
    ]
}

/// Lowercased surface strings of every drug / drug-n annotation.
pub fn gold_surfaces(sentences: &[AnnotatedSentence]) -> Vec<String> {
    let mut out: Vec<String> = sentences
        .iter()
        .flat_map(|s| s.targets().map(|a| a.surface.to_lowercase()))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Tuple label by string comparison: the longest surface that equals the
/// first k tokens joined by single spaces gives label k + 1.
pub fn brute_force_tuple_label(tokens: &[String], surfaces: &[String]) -> u8 {
    let mut best = 0;
    for k in 1..=tokens.len() {
        let prefix = tokens[..k].join(" ");
        if surfaces.contains(&prefix) {
            best = k;
        }
    }
    1 + best as u8
}

/// Per-token labels: a token is 1 when some surface occurs as a contiguous
/// token run covering it.
pub fn brute_force_sequence_labels(tokens: &[String], surfaces: &[String]) -> Vec<u8> {
    let mut labels = vec![0u8; tokens.len()];
    for surface in surfaces {
        let n = surface.split(' ').count();
        for start in 0..tokens.len() {
            if start + n <= tokens.len() && tokens[start..start + n].join(" ") == *surface {
                labels[start..start + n].iter_mut().for_each(|l| *l = 1);
            }
        }
    }
    labels
}

/// Random word sentences of length 1..=max_len.
pub fn random_sentences(n: usize, max_len: usize, seed: u64) -> Vec<TokenizedSentence> {
    let mut rng = rng::seeded(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let tokens = (0..len).map(|_| format!("w{}", rng.random_range(0..50))).collect();
            TokenizedSentence::new(format!("r{i}"), tokens)
        })
        .collect()
}

/// Brute-force mean pairwise distance: full double loop over ordered pairs,
/// halved, divided by n(n - 1).
pub fn brute_force_pairwise(vectors: &[Vec<f64>]) -> f64 {
    let n = vectors.len();
    let mut ordered = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                ordered += d.sqrt();
            }
        }
    }
    (ordered / 2.0) / (n * (n - 1)) as f64
}
