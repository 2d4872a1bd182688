//! Compares the candidate-selection strategies on technique-2 tuples.
//!
//! cargo run --release --example candidate_selection

use std::path::PathBuf;

use drugner::corpus::{build_frequency_table, tokenize_all};
use drugner::embedding::{train_cbow, CbowConfig};
use drugner::pipeline::load_corpus;
use drugner::representation::{build_drug_lexicon, technique2_tuples};
use drugner::selection::{apply_selection, SelectionStrategy};

fn main() -> drugner::Result<()> {
    let toy = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let corpus = load_corpus(&toy.join("train.tsv"), None)?;
    let sentences = tokenize_all(&corpus);
    let table = train_cbow(
        &sentences,
        &CbowConfig {
            dimension: 20,
            epochs: 10,
            ..CbowConfig::default()
        },
    )?;
    let tuples = technique2_tuples(&sentences, &table, &build_drug_lexicon(&corpus));
    let frequencies = build_frequency_table(&sentences);

    println!("strategy          tuples        drug tuples");
    for strategy in [
        SelectionStrategy::All,
        SelectionStrategy::LowerTwoThirds,
        SelectionStrategy::Cluster { x: 1, y: 3 },
        SelectionStrategy::Cluster { x: 2, y: 3 },
        SelectionStrategy::Cluster { x: 4, y: 6 },
    ] {
        let (_, m) = apply_selection(&tuples, strategy, &frequencies, 1)?;
        println!(
            "{:<16} {:>5}/{:<5}  {:>5}/{:<5}",
            strategy.to_string(),
            m.tuples_after,
            m.tuples_before,
            m.drug_tuples_after,
            m.drug_tuples_before
        );
    }
    Ok(())
}
