mod common;

use common::*;
use drugner::corpus::{build_frequency_table, TokenizedSentence};
use drugner::eval::{harmonic_f, score, EvalReport, NameSet};
use drugner::models::checkpoint::Checkpoint;
use drugner::models::{Activation, LstmConfig, LstmModel, ModelKind, Network, Scaling, TupleClassifier};
use drugner::representation::{
    global_stream_windows, label_tuple, per_sentence_windows, read_sequences, read_tuples, sequence_labels,
    write_sequences, write_tuples, DrugLexicon, SequenceSample, SequenceStep, TupleSample,
};
use drugner::rng;
use drugner::selection::select_lower_two_thirds;
use ndarray::Array2;
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    (0..12u8).prop_map(|i| format!("t{i}"))
}

fn sentences() -> impl Strategy<Value = Vec<TokenizedSentence>> {
    prop::collection::vec(prop::collection::vec(word(), 1..9), 1..8).prop_map(|ss| {
        ss.into_iter().enumerate().map(|(i, t)| TokenizedSentence::new(format!("s{i}"), t)).collect()
    })
}

fn lexicon() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(word(), 1..4), 0..5)
}

fn floats(n: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-4.0f32..4.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_counts(ss in sentences()) {
        let total: usize = ss.iter().map(|s| s.tokens.len()).sum();
        let stream = global_stream_windows(&ss);
        prop_assert_eq!(stream.len(), total.saturating_sub(4));
        prop_assert!(stream.iter().all(|w| w.len() == 5));
        let per = per_sentence_windows(&ss);
        prop_assert_eq!(per.len(), total);
        prop_assert!(per.iter().all(|w| w.len() == 5 && w[0] != "*"));
    }

    #[test]
    fn labels_match_brute_force(ss in sentences(), entries in lexicon()) {
        let lex = DrugLexicon::from_entries(entries.clone());
        let surfaces: Vec<String> = entries.iter().map(|e| e.join(" ")).collect();
        for w in per_sentence_windows(&ss) {
            prop_assert_eq!(label_tuple(&w, &lex), brute_force_tuple_label(&w, &surfaces));
        }
        for s in &ss {
            prop_assert_eq!(sequence_labels(&s.tokens, &lex), brute_force_sequence_labels(&s.tokens, &surfaces));
        }
    }

    #[test]
    fn frequency_selection_is_an_ordered_subset(ss in sentences(), keep in any::<u64>()) {
        let table = build_frequency_table(&ss);
        prop_assume!(table.unique_tokens >= 3);
        let tuples: Vec<TupleSample> = per_sentence_windows(&ss)
            .into_iter()
            .enumerate()
            .map(|(i, tokens)| TupleSample { tokens, label: 1 + (i as u64 ^ keep).wrapping_rem(6) as u8, vector: vec![i as f32] })
            .collect();
        let kept = select_lower_two_thirds(&tuples, &table).unwrap();
        let mut cursor = tuples.iter();
        for k in &kept {
            prop_assert!(cursor.any(|t| t == k), "kept tuple out of order or foreign");
        }
    }

    #[test]
    fn scores_follow_their_definitions(
        extracted in prop::collection::btree_set(0..20u8, 0..12),
        gold in prop::collection::btree_set(0..20u8, 1..12),
    ) {
        let to_set = |s: &std::collections::BTreeSet<u8>| {
            let mut n = NameSet::new();
            for v in s { n.insert_text(&format!("d{v}")); }
            n
        };
        let r: EvalReport = score(&to_set(&extracted), &to_set(&gold));
        prop_assert_eq!(r.true_positive + r.false_positive, extracted.len());
        prop_assert_eq!(r.true_positive + r.false_negative, gold.len());
        prop_assert_eq!(r.true_positive, extracted.intersection(&gold).count());
        if r.precision + r.recall > 0.0 {
            let f = 2.0 * r.precision * r.recall / (r.precision + r.recall);
            prop_assert!((r.f_score - f).abs() < 1e-12);
        }
        prop_assert!(r.f_score <= (r.precision + r.recall) / 2.0 + 1e-12);
        prop_assert_eq!(r.f_score, harmonic_f(r.precision, r.recall));
    }

    #[test]
    fn tuple_files_round_trip(rows in prop::collection::vec((prop::collection::vec(word(), 5), 1..=6u8, floats(6)), 0..10)) {
        let tuples: Vec<TupleSample> = rows.into_iter().map(|(tokens, label, vector)| TupleSample { tokens, label, vector }).collect();
        prop_assert_eq!(read_tuples(&write_tuples(&tuples), "mem").unwrap(), tuples);
    }

    #[test]
    fn sequence_files_round_trip(seqs in prop::collection::vec(prop::collection::vec((word(), floats(4), 0..=1u8), 1..6), 0..5)) {
        let samples: Vec<SequenceSample> = seqs
            .into_iter()
            .enumerate()
            .map(|(i, steps)| SequenceSample {
                sentence_id: format!("q{i}"),
                steps: steps.into_iter().map(|(token, features, label)| SequenceStep { token, features, label }).collect(),
            })
            .collect();
        prop_assert_eq!(read_sequences(&write_sequences(&samples), "mem").unwrap(), samples);
    }

    #[test]
    fn checkpoints_restore_f32_weights(sizes in prop::collection::vec(1..6usize, 2..5), seed in any::<u64>()) {
        let network = Network::new(&sizes, Activation::Sigmoid, Activation::Softmax, &mut rng::seeded(seed)).unwrap();
        let inputs = Array2::from_shape_fn((3, sizes[0]), |(i, j)| (i + j) as f64 / 5.0);
        let model = TupleClassifier {
            kind: ModelKind::Mlp,
            scaling: Scaling::Identity,
            network,
        };
        let ck = Checkpoint::from_classifier(&model, seed, serde_json::Value::Null);
        let mut bin = Vec::new();
        ck.write_binary(&mut bin).unwrap();
        let back = Checkpoint::read(bin.as_slice(), true).unwrap();
        prop_assert_eq!(&back, &ck);
        let restored = back.to_classifier().unwrap();
        for (a, b) in restored.network.layers.iter().zip(&model.network.layers) {
            for (x, y) in a.weights.iter().zip(b.weights.iter()) {
                prop_assert_eq!(*x, f64::from(*y as f32));
            }
        }
        let p = restored.predict_inputs(&inputs);
        let q = model.predict_inputs(&inputs);
        for (a, b) in p.iter().zip(&q) {
            for (x, y) in a.posteriors.iter().zip(&b.posteriors) {
                prop_assert!((x - y).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn lstm_checkpoints_round_trip(hidden in prop::collection::vec(1..4usize, 1..3), input in 1..5usize, seed in any::<u64>()) {
        let config = LstmConfig { input_dimension: input, hidden_sizes: hidden, ..LstmConfig::default() };
        let model = LstmModel::new(&config, &mut rng::seeded(seed)).unwrap();
        let ck = Checkpoint::from_lstm(&model, seed, serde_json::Value::Null);
        let back = Checkpoint::read(ck.to_text().as_bytes(), false).unwrap();
        prop_assert_eq!(&back, &ck);
        let restored = back.to_lstm().unwrap();
        let seq = SequenceSample {
            sentence_id: "x".into(),
            steps: (0..4).map(|i| SequenceStep { token: "t".into(), features: vec![i as f32 / 4.0; input], label: 0 }).collect(),
        };
        for (a, b) in restored.probabilities(&seq).iter().zip(model.probabilities(&seq)) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }
}
