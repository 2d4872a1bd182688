//! The three input representations built for one annotated sentence.
//!
//! cargo run --example representations

use drugner::corpus::{parse_tsv_str, tokenize_all};
use drugner::embedding::{train_cbow, CbowConfig};
use drugner::representation::{build_drug_lexicon, technique1_tuples, technique2_tuples, technique3_sequences};

const CORPUS: &str = "\
s1\tconcomitant use of aspirin and warfarin may increase bleeding risk\t19-25:drug;31-38:drug
s2\tpatients receiving beta blockers should be monitored\t19-31:group
";

fn main() -> drugner::Result<()> {
    let corpus = parse_tsv_str(CORPUS, "inline")?;
    let sentences = tokenize_all(&corpus);
    let table = train_cbow(
        &sentences,
        &CbowConfig {
            dimension: 4,
            ..CbowConfig::default()
        },
    )?;
    let lexicon = build_drug_lexicon(&corpus);
    println!("lexicon: {:?}\n", lexicon.entries());

    println!("technique 1 (windows over the joined stream):");
    for t in technique1_tuples(&sentences, &table, &lexicon).iter().take(6) {
        println!("  {} -> {}", t.tokens.join(" "), t.label);
    }
    println!("\ntechnique 2 (per sentence, padded):");
    for t in technique2_tuples(&sentences[..1], &table, &lexicon) {
        println!("  {} -> {}", t.tokens.join(" "), t.label);
    }
    println!("\ntechnique 3 (token sequences):");
    for s in technique3_sequences(&sentences[..1], &table, &lexicon) {
        for step in &s.steps {
            let f: Vec<String> = step.features.iter().map(|v| format!("{v:+.2}")).collect();
            println!("  {:<12} {} [{}]", step.token, step.label, f.join(" "));
        }
    }
    Ok(())
}
