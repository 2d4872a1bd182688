//! Full-size runs on the DDI extraction corpora: MLP on DrugBank and the LSTM
//! on DrugBank and MedLine, with default (full-size) hyperparameters.
//!
//! DRUGNER_DRUGBANK_TRAIN=… DRUGNER_DRUGBANK_TEST=… DRUGNER_MEDLINE_TRAIN=…
//! DRUGNER_MEDLINE_TEST=… [DRUGNER_AUX_TEXT=…] cargo run --release --example reproduce_semeval

use std::path::PathBuf;

use drugner::embedding::CbowConfig;
use drugner::eval::{run_scenario, ModelConfig, ScenarioConfig};
use drugner::models::{LstmConfig, MlpConfig, Regularization};
use drugner::pipeline::{load_auxiliary, load_corpus};
use drugner::representation::{DistanceBlock, Technique};
use drugner::selection::SelectionStrategy;

fn path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).map(PathBuf::from)
}

fn main() -> drugner::Result<()> {
    let names = ["DRUGNER_DRUGBANK_TRAIN", "DRUGNER_DRUGBANK_TEST", "DRUGNER_MEDLINE_TRAIN", "DRUGNER_MEDLINE_TEST"];
    let Some(paths) = names.iter().map(|n| path(n)).collect::<Option<Vec<_>>>() else {
        eprintln!("set {} (and optionally DRUGNER_AUX_TEXT)", names.join(", "));
        return Ok(());
    };
    let aux = load_auxiliary(&path("DRUGNER_AUX_TEXT").into_iter().collect::<Vec<_>>())?;
    let mlp = ScenarioConfig {
        technique: Technique::PerSentence,
        selection: SelectionStrategy::LowerTwoThirds,
        model: ModelConfig::Mlp(MlpConfig {
            regularization: Regularization::L0,
            ..MlpConfig::default()
        }),
        embedding: CbowConfig::default(),
        distance_block: DistanceBlock::Displacement,
        seed: 1,
    };
    let lstm = ScenarioConfig {
        technique: Technique::Sequence,
        selection: SelectionStrategy::All,
        model: ModelConfig::Lstm(LstmConfig::default()),
        ..mlp.clone()
    };
    let runs = [("DrugBank", 0, &mlp, "mlp"), ("DrugBank", 0, &lstm, "lstm"), ("MedLine", 2, &lstm, "lstm")];
    for (corpus, i, config, model) in runs {
        let train = load_corpus(&paths[i], None)?;
        let test = load_corpus(&paths[i + 1], None)?;
        let r = run_scenario(&train, &test, &aux, config)?.report;
        println!("{corpus} {model}: P {:.4} R {:.4} F {:.4}", r.precision, r.recall, r.f_score);
    }
    Ok(())
}
