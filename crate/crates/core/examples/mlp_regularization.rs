//! MLP on technique-2 tuples under the three weight-decay settings.
//!
//! cargo run --release --example mlp_regularization -- [epochs]

use std::path::PathBuf;

use drugner::embedding::CbowConfig;
use drugner::eval::{run_scenario, ModelConfig, Representation, ScenarioConfig};
use drugner::models::{l2_lambda, MlpConfig, Regularization};
use drugner::pipeline::{load_auxiliary, load_corpus};
use drugner::representation::{DistanceBlock, Technique};
use drugner::selection::SelectionStrategy;

fn main() -> drugner::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(60, |s| s.parse().expect("epochs"));
    let toy = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let train = load_corpus(&toy.join("train.tsv"), None)?;
    let test = load_corpus(&toy.join("test.tsv"), None)?;
    let aux = load_auxiliary(&[toy.join("auxiliary.txt")])?;

    for regularization in [Regularization::L0, Regularization::L1, Regularization::L2] {
        let mlp = MlpConfig {
            layer_sizes: vec![100, 40, 40, 6],
            epochs,
            batch_size: 50,
            regularization,
            ..MlpConfig::default()
        };
        let config = ScenarioConfig {
            technique: Technique::PerSentence,
            selection: SelectionStrategy::LowerTwoThirds,
            model: ModelConfig::Mlp(mlp.clone()),
            embedding: CbowConfig {
                dimension: 20,
                epochs: 10,
                ..CbowConfig::default()
            },
            distance_block: DistanceBlock::Displacement,
            seed: 1,
        };
        let outcome = run_scenario(&train, &test, &aux, &config)?;
        let lambda = match (&outcome.train_data, regularization) {
            (_, Regularization::L0) => 0.0,
            (_, Regularization::L1) => 1.0,
            (Representation::Tuples(t), Regularization::L2) => l2_lambda(t, mlp.pair_normalization)?,
            _ => unreachable!(),
        };
        let r = &outcome.report;
        println!(
            "{regularization:?} (lambda {lambda:.4}): P {:.4} R {:.4} F {:.4}, final loss {:.4}",
            r.precision,
            r.recall,
            r.f_score,
            outcome.train_report.final_loss().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
