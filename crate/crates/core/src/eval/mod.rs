//! Set-based precision, recall and F-score of extracted drug names, plus the
//! end-to-end experiment drivers.

mod scenario;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize_text, AnnotatedSentence};
use crate::embedding::PAD_TOKEN;
use crate::error::{Error, Result};
use crate::representation::{SequenceSample, TupleSample};

pub(crate) use scenario::run_scenario_cached;
pub use scenario::{
    cross_validate, run_scenario, split_corpus, Aggregate, CrossValidation, CvConfig, ModelConfig, Representation,
    ScenarioConfig, ScenarioManifest, ScenarioOutcome, TrainedModel,
};

/// Distinct drug names as lowercase token sequences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameSet {
    names: BTreeSet<Vec<String>>,
}

impl NameSet {
    pub fn new() -> Self {
        NameSet::default()
    }

    /// Lowercases the tokens; empty names are ignored.
    pub fn insert(&mut self, tokens: &[String]) -> bool {
        if tokens.is_empty() {
            return false;
        }
        self.names.insert(tokens.iter().map(|t| t.to_lowercase()).collect())
    }

    pub fn insert_text(&mut self, name: &str) -> bool {
        self.insert(&tokenize_text(name))
    }

    pub fn contains(&self, tokens: &[String]) -> bool {
        self.names.contains(tokens)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<String>> {
        self.names.iter()
    }

    pub fn intersection_len(&self, other: &NameSet) -> usize {
        self.names.intersection(&other.names).count()
    }
}

impl<S: AsRef<str>> FromIterator<S> for NameSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut set = NameSet::new();
        for name in iter {
            set.insert_text(name.as_ref());
        }
        set
    }
}

/// Drug and drug-n surfaces of the annotations.
pub fn gold_nameset(sentences: &[AnnotatedSentence]) -> NameSet {
    let mut set = NameSet::new();
    for a in sentences.iter().flat_map(AnnotatedSentence::targets) {
        set.insert_text(&a.surface);
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn harmonic_f(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl EvalReport {
    /// Nothing extracted gives precision 1 (with a warning); no gold names gives
    /// recall 0.
    pub fn from_counts(true_positive: usize, false_positive: usize, false_negative: usize) -> Self {
        let extracted = true_positive + false_positive;
        let gold = true_positive + false_negative;
        let precision = if extracted == 0 {
            warn!("no names extracted; precision reported as 1");
            1.0
        } else {
            true_positive as f64 / extracted as f64
        };
        let recall = if gold == 0 {
            warn!("gold set is empty; recall reported as 0");
            0.0
        } else {
            true_positive as f64 / gold as f64
        };
        EvalReport {
            precision,
            recall,
            f_score: harmonic_f(precision, recall),
            true_positive,
            false_positive,
            false_negative,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "precision\t{:.4}", self.precision).unwrap();
        writeln!(out, "recall\t{:.4}", self.recall).unwrap();
        writeln!(out, "f_score\t{:.4}", self.f_score).unwrap();
        writeln!(out, "true_positive\t{}", self.true_positive).unwrap();
        writeln!(out, "false_positive\t{}", self.false_positive).unwrap();
        writeln!(out, "false_negative\t{}", self.false_negative).unwrap();
        out
    }
}

pub fn score(extracted: &NameSet, gold: &NameSet) -> EvalReport {
    let tp = extracted.intersection_len(gold);
    EvalReport::from_counts(tp, extracted.len() - tp, gold.len() - tp)
}

/// Each tuple predicted as class `c > 1` contributes its first `c − 1` tokens
/// (stopping at padding).
pub fn tuples_to_nameset(predictions: &[u8], tuples: &[TupleSample]) -> Result<NameSet> {
    if predictions.len() != tuples.len() {
        return Err(Error::Dimension {
            expected: tuples.len(),
            found: predictions.len(),
        });
    }
    let mut set = NameSet::new();
    for (&class, tuple) in predictions.iter().zip(tuples) {
        if class <= 1 {
            continue;
        }
        let len = usize::from(class - 1).min(tuple.tokens.len());
        let name: Vec<String> = tuple.tokens[..len].iter().take_while(|t| *t != PAD_TOKEN).cloned().collect();
        set.insert(&name);
    }
    Ok(set)
}

/// Each maximal run of 1-labels within a sentence becomes one name.
pub fn sequences_to_nameset(predictions: &[Vec<u8>], sequences: &[SequenceSample]) -> Result<NameSet> {
    if predictions.len() != sequences.len() {
        return Err(Error::Dimension {
            expected: sequences.len(),
            found: predictions.len(),
        });
    }
    let mut set = NameSet::new();
    for (labels, seq) in predictions.iter().zip(sequences) {
        if labels.len() != seq.len() {
            return Err(Error::Dimension {
                expected: seq.len(),
                found: labels.len(),
            });
        }
        let mut run: Vec<String> = Vec::new();
        for (&label, step) in labels.iter().zip(&seq.steps) {
            if label == 1 {
                run.push(step.token.clone());
            } else if !run.is_empty() {
                set.insert(&run);
                run.clear();
            }
        }
        set.insert(&run);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::SequenceStep;

    fn names(items: &[&str]) -> NameSet {
        items.iter().collect()
    }

    #[test]
    fn hand_intersection() {
        let r = score(&names(&["a", "b", "d"]), &names(&["a", "b", "c"]));
        assert_eq!((r.true_positive, r.false_positive, r.false_negative), (2, 1, 1));
        for v in [r.precision, r.recall, r.f_score] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_and_degenerate_scores() {
        let gold = names(&["warfarin", "sodium polystyrene sulfonate"]);
        let r = score(&gold, &gold);
        assert_eq!((r.precision, r.recall, r.f_score), (1.0, 1.0, 1.0));
        let empty = score(&NameSet::new(), &gold);
        assert_eq!((empty.precision, empty.recall, empty.f_score), (1.0, 0.0, 0.0));
        let no_gold = score(&gold, &NameSet::new());
        assert_eq!((no_gold.precision, no_gold.recall), (0.0, 0.0));
    }

    #[test]
    fn table_f_scores_follow_from_precision_and_recall() {
        // 2PR/(P+R) by hand: 1.2948 / 1.6474 and 1.7842 / 1.8921.
        assert!((harmonic_f(1.0, 0.6474) - 1.2948 / 1.6474).abs() < 1e-15);
        assert!((harmonic_f(1.0, 0.8921) - 1.7842 / 1.8921).abs() < 1e-15);
        // 0.78597 rounds to 0.7860, one unit above the reference 0.7859.
        assert!((harmonic_f(1.0, 0.6474) - 0.7860).abs() < 5e-5);
        assert!((harmonic_f(1.0, 0.8921) - 0.9430).abs() < 5e-5);
    }

    #[test]
    fn names_are_case_insensitive_sets() {
        let mut s = NameSet::new();
        assert!(s.insert_text("Warfarin"));
        assert!(!s.insert_text("warfarin"));
        assert_eq!(s.len(), 1);
    }

    fn tuple(tokens: &str) -> TupleSample {
        TupleSample {
            tokens: tokens.split(' ').map(String::from).collect(),
            label: 1,
            vector: vec![],
        }
    }

    #[test]
    fn tuple_predictions_become_names() {
        let tuples = vec![
            tuple("clostridium difficile toxin a antimicrobial"),
            tuple("difficile toxin a antimicrobial agents"),
            tuple("clostridium difficile toxin a antimicrobial"),
            tuple("x * * * *"),
        ];
        let set = tuples_to_nameset(&[5, 1, 5, 4], &tuples).unwrap();
        assert_eq!(set, names(&["clostridium difficile toxin a", "x"]));
        assert!(tuples_to_nameset(&[1, 1, 1, 1], &tuples).unwrap().is_empty());
        assert!(tuples_to_nameset(&[1], &tuples).is_err());
    }

    fn seq(text: &str) -> SequenceSample {
        SequenceSample {
            sentence_id: "s".into(),
            steps: text
                .split(' ')
                .map(|t| SequenceStep { token: t.into(), features: vec![], label: 0 })
                .collect(),
        }
    }

    #[test]
    fn sequence_runs_become_names() {
        let s1 = seq("drug interaction studies with plenaxis were performed");
        let s2 = seq("cytochrome p-450 is not known in the");
        let set = sequences_to_nameset(&[vec![0, 0, 0, 0, 1, 0, 0], vec![1, 1, 0, 0, 0, 0, 0]], &[s1.clone(), s2]).unwrap();
        assert_eq!(set, names(&["plenaxis", "cytochrome p-450"]));
        assert!(sequences_to_nameset(&[vec![0; 7]], &[s1]).unwrap().is_empty());
    }
}
