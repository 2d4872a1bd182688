//! Tuple and sequence representations with their labels.
//!
//! * global stream: 5-token windows over all sentences joined end to end;
//! * per sentence: one window per token, right-padded with [`PAD_TOKEN`];
//! * sequence: per-token `[vector, displacement to previous vector]` steps with a
//!   binary drug / non-drug label.
//!
//! A tuple label `c > 1` means the first `c - 1` tokens form a drug name.

mod io;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize_text, AnnotatedSentence, TokenizedSentence};
use crate::embedding::{EmbeddingTable, PAD_TOKEN};

pub use io::{read_sequences, read_tuples, write_sequences, write_tuples};

/// Tokens per tuple.
pub const TUPLE_WIDTH: usize = 5;
/// Number of tuple classes: non-drug plus drug names of 1..=5 tokens.
pub const N_CLASSES: usize = TUPLE_WIDTH + 1;

/// Drug and drug-n names as token sequences, longest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DrugLexicon {
    entries: Vec<Vec<String>>,
    lookup: HashSet<Vec<String>>,
}

impl DrugLexicon {
    /// Deduplicates and orders entries; entries that are empty or longer than
    /// [`TUPLE_WIDTH`] tokens are dropped with a warning.
    pub fn from_entries(entries: impl IntoIterator<Item = Vec<String>>) -> Self {
        let mut lookup = HashSet::new();
        for entry in entries {
            if entry.is_empty() {
                continue;
            }
            if entry.len() > TUPLE_WIDTH {
                warn!(
                    "drug name `{}` has {} tokens; tuples hold at most {TUPLE_WIDTH}",
                    entry.join(" "),
                    entry.len()
                );
                continue;
            }
            lookup.insert(entry);
        }
        let mut entries: Vec<Vec<String>> = lookup.iter().cloned().collect();
        entries.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        DrugLexicon { entries, lookup }
    }

    pub fn entries(&self) -> &[Vec<String>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.lookup.contains(tokens)
    }

    /// Length of the longest entry equal to a prefix of `tokens`.
    pub fn longest_prefix_match(&self, tokens: &[String]) -> usize {
        (1..=tokens.len().min(TUPLE_WIDTH))
            .rev()
            .find(|&k| self.lookup.contains(&tokens[..k]))
            .unwrap_or(0)
    }

    /// Distinct single tokens appearing in any entry.
    pub fn token_set(&self) -> HashSet<String> {
        self.entries.iter().flatten().cloned().collect()
    }
}

pub fn build_drug_lexicon(sentences: &[AnnotatedSentence]) -> DrugLexicon {
    DrugLexicon::from_entries(
        sentences
            .iter()
            .flat_map(AnnotatedSentence::targets)
            .map(|a| tokenize_text(&a.surface)),
    )
}

/// Class 1..=6 for a 5-token window: `1 + k` for the longest lexicon entry of
/// length `k` matching the leading tokens, `1` when nothing matches.
pub fn label_tuple(tokens: &[String], lexicon: &DrugLexicon) -> u8 {
    1 + lexicon.longest_prefix_match(tokens) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleSample {
    pub tokens: Vec<String>,
    /// 1..=6
    pub label: u8,
    /// Concatenated token vectors, `5 * D` wide.
    pub vector: Vec<f32>,
}

impl TupleSample {
    /// Zero-based class index for classifiers.
    pub fn class_index(&self) -> usize {
        usize::from(self.label) - 1
    }
}

/// Concatenates the token vectors in order; the pad token contributes zeros.
pub fn vectorize_tuple(tokens: &[String], table: &EmbeddingTable) -> Vec<f32> {
    let mut out = Vec::with_capacity(tokens.len() * table.dimension());
    for token in tokens {
        out.extend_from_slice(&table.vector(token));
    }
    out
}

fn make_tuple(tokens: Vec<String>, table: &EmbeddingTable, lexicon: &DrugLexicon) -> TupleSample {
    TupleSample {
        label: label_tuple(&tokens, lexicon),
        vector: vectorize_tuple(&tokens, table),
        tokens,
    }
}

/// Token windows of the global-stream representation (`n - 4` of them).
pub fn global_stream_windows(sentences: &[TokenizedSentence]) -> Vec<Vec<String>> {
    let stream: Vec<&String> = sentences.iter().flat_map(|s| s.tokens.iter()).collect();
    if stream.len() < TUPLE_WIDTH {
        if !stream.is_empty() {
            warn!(
                "token stream has {} tokens, fewer than the tuple width {TUPLE_WIDTH}",
                stream.len()
            );
        }
        return Vec::new();
    }
    stream
        .windows(TUPLE_WIDTH)
        .map(|w| w.iter().map(|t| (*t).clone()).collect())
        .collect()
}

/// Token windows of the per-sentence representation (one per token).
pub fn per_sentence_windows(sentences: &[TokenizedSentence]) -> Vec<Vec<String>> {
    sentences
        .iter()
        .flat_map(|s| {
            (0..s.tokens.len()).map(move |i| {
                (i..i + TUPLE_WIDTH)
                    .map(|j| s.tokens.get(j).cloned().unwrap_or_else(|| PAD_TOKEN.to_string()))
                    .collect()
            })
        })
        .collect()
}

/// Windows of five over all sentences joined end to end; windows may straddle
/// sentence boundaries.
pub fn technique1_tuples(
    sentences: &[TokenizedSentence],
    table: &EmbeddingTable,
    lexicon: &DrugLexicon,
) -> Vec<TupleSample> {
    global_stream_windows(sentences)
        .into_iter()
        .map(|w| make_tuple(w, table, lexicon))
        .collect()
}

/// One window per token of each sentence, right-padded with `*`.
pub fn technique2_tuples(
    sentences: &[TokenizedSentence],
    table: &EmbeddingTable,
    lexicon: &DrugLexicon,
) -> Vec<TupleSample> {
    per_sentence_windows(sentences)
        .into_iter()
        .map(|w| make_tuple(w, table, lexicon))
        .collect()
}

/// Content of the second half of each sequence step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBlock {
    /// `v_i - v_{i-1}` componentwise; its norm is the euclidean distance.
    #[default]
    Displacement,
    /// The scalar distance `‖v_i - v_{i-1}‖` repeated in every slot.
    ScalarBroadcast,
}

impl FromStr for DistanceBlock {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "displacement" => Ok(DistanceBlock::Displacement),
            "scalar_broadcast" => Ok(DistanceBlock::ScalarBroadcast),
            other => Err(format!("unknown distance block `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceStep {
    pub token: String,
    /// `2 * D` wide: token vector then distance block (zeros on the first step).
    pub features: Vec<f32>,
    /// 1 when the token lies inside a lexicon occurrence.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub sentence_id: String,
    pub steps: Vec<SequenceStep>,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Marks every token covered by some occurrence of a lexicon entry.
pub fn sequence_labels(tokens: &[String], lexicon: &DrugLexicon) -> Vec<u8> {
    let mut labels = vec![0u8; tokens.len()];
    for start in 0..tokens.len() {
        for len in 1..=TUPLE_WIDTH.min(tokens.len() - start) {
            if lexicon.contains(&tokens[start..start + len]) {
                labels[start..start + len].iter_mut().for_each(|l| *l = 1);
            }
        }
    }
    labels
}

pub fn technique3_sequences(
    sentences: &[TokenizedSentence],
    table: &EmbeddingTable,
    lexicon: &DrugLexicon,
) -> Vec<SequenceSample> {
    technique3_sequences_with(sentences, table, lexicon, DistanceBlock::Displacement)
}

pub fn technique3_sequences_with(
    sentences: &[TokenizedSentence],
    table: &EmbeddingTable,
    lexicon: &DrugLexicon,
    block: DistanceBlock,
) -> Vec<SequenceSample> {
    let dim = table.dimension();
    sentences
        .iter()
        .map(|s| {
            let labels = sequence_labels(&s.tokens, lexicon);
            let mut previous: Option<Vec<f32>> = None;
            let steps = s
                .tokens
                .iter()
                .zip(labels)
                .map(|(token, label)| {
                    let current = table.vector(token).into_owned();
                    let mut features = Vec::with_capacity(2 * dim);
                    features.extend_from_slice(&current);
                    match &previous {
                        None => features.extend(std::iter::repeat_n(0.0, dim)),
                        Some(prev) => match block {
                            DistanceBlock::Displacement => {
                                features.extend(current.iter().zip(prev).map(|(c, p)| c - p))
                            }
                            DistanceBlock::ScalarBroadcast => {
                                let d = current
                                    .iter()
                                    .zip(prev)
                                    .map(|(c, p)| f64::from(c - p).powi(2))
                                    .sum::<f64>()
                                    .sqrt() as f32;
                                features.extend(std::iter::repeat_n(d, dim))
                            }
                        },
                    }
                    previous = Some(current);
                    SequenceStep {
                        token: token.clone(),
                        features,
                        label,
                    }
                })
                .collect();
            SequenceSample {
                sentence_id: s.id.clone(),
                steps,
            }
        })
        .collect()
}

/// Which representation a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Technique {
    /// Windows over one stream of all sentences.
    GlobalStream,
    /// Padded windows per sentence.
    PerSentence,
    /// Per-token sequences.
    Sequence,
}

impl TryFrom<u8> for Technique {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Technique::GlobalStream),
            2 => Ok(Technique::PerSentence),
            3 => Ok(Technique::Sequence),
            other => Err(format!("technique must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<Technique> for u8 {
    fn from(t: Technique) -> u8 {
        match t {
            Technique::GlobalStream => 1,
            Technique::PerSentence => 2,
            Technique::Sequence => 3,
        }
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u8>().map_err(|e| e.to_string())?.try_into()
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EntityKind;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn lexicon(names: &[&str]) -> DrugLexicon {
        DrugLexicon::from_entries(names.iter().map(|n| toks(n)))
    }

    #[test]
    fn lexicon_is_deduplicated_and_longest_first() {
        let lex = lexicon(&["sodium", "sodium polystyrene sulfonate", "sodium", "aspirin", "a b c d e f"]);
        let entries: Vec<String> = lex.entries().iter().map(|e| e.join(" ")).collect();
        assert_eq!(entries, ["sodium polystyrene sulfonate", "aspirin", "sodium"]);
    }

    #[test]
    fn lexicon_from_annotations_uses_only_targets() {
        let mut s = AnnotatedSentence {
            id: "s".into(),
            text: "Aspirin and DDAVP and anticoagulants and Aspirin".into(),
            annotations: vec![],
        };
        let a = s.annotate(0, 6, EntityKind::Drug).unwrap();
        let b = s.annotate(12, 16, EntityKind::Brand).unwrap();
        let c = s.annotate(22, 35, EntityKind::Group).unwrap();
        let d = s.annotate(41, 47, EntityKind::Drug).unwrap();
        s.annotations = vec![a, b, c, d];
        let lex = build_drug_lexicon(&[s]);
        assert_eq!(lex.entries(), &[toks("aspirin")]);
        assert!(build_drug_lexicon(&[]).is_empty());
    }

    #[test]
    fn label_prefers_longest_match() {
        let lex = lexicon(&["sodium", "sodium polystyrene sulfonate"]);
        assert_eq!(label_tuple(&toks("sodium polystyrene sulfonate should be"), &lex), 4);
        assert_eq!(label_tuple(&toks("sodium chloride was given ."), &lex), 2);
        assert_eq!(label_tuple(&toks("the sodium level was low"), &lex), 1);
        assert_eq!(label_tuple(&toks("a b c d e"), &DrugLexicon::default()), 1);
    }

    #[test]
    fn window_counts() {
        let s = vec![TokenizedSentence::new("x", toks("a b c d e"))];
        assert_eq!(global_stream_windows(&s).len(), 1);
        let short = vec![TokenizedSentence::new("x", toks("a b"))];
        assert!(global_stream_windows(&short).is_empty());
        let one = vec![TokenizedSentence::new("x", toks("x"))];
        assert_eq!(per_sentence_windows(&one), vec![toks("x * * * *")]);
        assert!(per_sentence_windows(&[TokenizedSentence::new("e", vec![])]).is_empty());
    }

    #[test]
    fn twenty_token_stream_matches_sliding_oracle() {
        let words: Vec<String> = (0..20).map(|i| format!("w{i}")).collect();
        let s = vec![
            TokenizedSentence::new("a", words[..7].to_vec()),
            TokenizedSentence::new("b", words[7..12].to_vec()),
            TokenizedSentence::new("c", words[12..].to_vec()),
        ];
        let windows = global_stream_windows(&s);
        assert_eq!(windows.len(), 16);
        for (i, w) in windows.iter().enumerate() {
            let expected: Vec<String> = (i..i + 5).map(|j| format!("w{j}")).collect();
            assert_eq!(w, &expected);
        }
    }

    #[test]
    fn six_token_sentence_hand_enumeration() {
        let s = vec![TokenizedSentence::new("x", toks("u v w x y z"))];
        let expected = [
            "u v w x y", "v w x y z", "w x y z *", "x y z * *", "y z * * *", "z * * * *",
        ];
        let got = per_sentence_windows(&s);
        assert_eq!(got.len(), 6);
        for (g, e) in got.iter().zip(expected) {
            assert_eq!(g, &toks(e));
        }
    }

    fn toy_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("p", &[1.0, 2.0]).unwrap();
        t.insert("q", &[-3.0, 0.5]).unwrap();
        t
    }

    #[test]
    fn vectorize_concatenates_and_pads_with_zero() {
        let t = toy_table();
        assert_eq!(
            vectorize_tuple(&toks("p q * q p"), &t),
            vec![1.0, 2.0, -3.0, 0.5, 0.0, 0.0, -3.0, 0.5, 1.0, 2.0]
        );
        assert!(vectorize_tuple(&toks("* * * * *"), &t).iter().all(|x| *x == 0.0));
        let wide = EmbeddingTable::new(100);
        assert_eq!(vectorize_tuple(&toks("a b c d e"), &wide).len(), 500);
    }

    #[test]
    fn sequence_features_hold_vector_and_displacement() {
        let t = toy_table();
        let s = vec![TokenizedSentence::new("s", toks("p q"))];
        let seq = technique3_sequences(&s, &t, &DrugLexicon::default());
        assert_eq!(seq[0].steps[0].features, vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(seq[0].steps[1].features, vec![-3.0, 0.5, -4.0, -1.5]);
        let broadcast = technique3_sequences_with(&s, &t, &DrugLexicon::default(), DistanceBlock::ScalarBroadcast);
        assert_eq!(broadcast[0].steps[1].features[2..], [18.25f64.sqrt() as f32; 2]);
    }

    #[test]
    fn single_token_sentence_has_zero_displacement() {
        let t = toy_table();
        let s = vec![TokenizedSentence::new("s", toks("q"))];
        let seq = technique3_sequences(&s, &t, &DrugLexicon::default());
        assert_eq!(seq[0].steps.len(), 1);
        assert_eq!(&seq[0].steps[0].features[2..], &[0.0, 0.0]);
    }

    #[test]
    fn multi_token_drugs_label_every_covered_token() {
        let lex = lexicon(&["green tea gallocatechins", "tea"]);
        assert_eq!(
            sequence_labels(&toks("surprisingly green tea gallocatechins , tea"), &lex),
            vec![0, 1, 1, 1, 0, 1]
        );
    }

    #[test]
    fn technique_round_trips_through_integers() {
        for t in [Technique::GlobalStream, Technique::PerSentence, Technique::Sequence] {
            assert_eq!(Technique::try_from(u8::from(t)).unwrap(), t);
        }
        assert!("4".parse::<Technique>().is_err());
    }
}
