//! Frequency table, three-way cumulative partition and quartiles of a corpus.
//!
//! cargo run --example corpus_stats -- [corpus.tsv|corpus.xml] [parts]

use std::path::PathBuf;

use drugner::corpus::{build_frequency_table, quartile_report, stats_report, tokenize_all};
use drugner::pipeline::load_corpus;
use drugner::representation::build_drug_lexicon;

fn main() -> drugner::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy/train.tsv"), PathBuf::from);
    let parts: usize = args.next().map_or(3, |s| s.parse().expect("parts"));

    let corpus = load_corpus(&path, None)?;
    let table = build_frequency_table(&tokenize_all(&corpus));
    let drugs = build_drug_lexicon(&corpus).token_set();
    print!("{}", stats_report(&table, parts, &drugs)?);

    println!("\nmost frequent:");
    for e in table.entries.iter().take(10) {
        println!("  {:>3} {:<16} {}", e.rank, e.token, e.count);
    }
    let q = quartile_report(&table);
    println!("\ntop quartile holds {} of {} tokens", q[0].sum_frequency, table.total_tokens);
    Ok(())
}
