//! Trains CBOW vectors and compares distances within and across the drug and
//! non-drug token groups.
//!
//! cargo run --release --example train_embeddings -- [dimension] [epochs]

use std::path::PathBuf;

use drugner::corpus::tokenize_all;
use drugner::embedding::{group_distance_stats, nearest_neighbors, train_cbow, CbowConfig};
use drugner::pipeline::{load_auxiliary, load_corpus};
use drugner::representation::build_drug_lexicon;

fn main() -> drugner::Result<()> {
    let mut args = std::env::args().skip(1);
    let dimension: usize = args.next().map_or(20, |s| s.parse().expect("dimension"));
    let epochs: usize = args.next().map_or(10, |s| s.parse().expect("epochs"));
    let toy = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");

    let corpus = load_corpus(&toy.join("train.tsv"), None)?;
    let mut sentences = tokenize_all(&corpus);
    sentences.extend(load_auxiliary(&[toy.join("auxiliary.txt")])?);
    let config = CbowConfig {
        dimension,
        epochs,
        ..CbowConfig::default()
    };
    let table = train_cbow(&sentences, &config)?;
    println!("{} tokens, dimension {}", table.len(), table.dimension());

    let lexicon = build_drug_lexicon(&corpus);
    for s in group_distance_stats(&table, &lexicon.token_set())? {
        println!(
            "{:<16} euclidean {:.4}  cosine {:.4}  ({} pairs)",
            s.group_pair.label(),
            s.mean_euclidean,
            s.mean_cosine,
            s.pairs
        );
    }
    if let Some(drug) = lexicon.entries().first() {
        println!("\nneighbours of `{}`:", drug[0]);
        for (token, sim) in nearest_neighbors(&table, &drug[0], 5)? {
            println!("  {token:<16} {sim:.4}");
        }
    }
    Ok(())
}
