//! Repeated random train/test splits of one corpus with mean, min and max scores.
//!
//! cargo run --release --example cross_validation -- [runs] [jobs]

use std::path::PathBuf;

use drugner::eval::{cross_validate, CvConfig};
use drugner::pipeline::{load_auxiliary, load_corpus, PipelineConfig};

fn main() -> drugner::Result<()> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().map_or(5, |s| s.parse().expect("runs"));
    let jobs: usize = args.next().map_or(2, |s| s.parse().expect("jobs"));
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let config = PipelineConfig::load(&root.join("configs/toy_lstm.toml"))?;
    let corpus = load_corpus(&config.data.train, None)?;
    let aux = load_auxiliary(&config.data.auxiliary)?;
    let cv = CvConfig {
        k_runs: runs,
        train_fraction: 0.8,
        seeds: Vec::new(),
    };
    let result = cross_validate(&corpus, &aux, &config.scenario(), &cv, jobs)?;
    print!("{}", result.to_text());
    Ok(())
}
