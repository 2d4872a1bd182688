//! DBN and stacked sparse autoencoder, each with and without layer-wise
//! pretraining, on the toy configs.
//!
//! cargo run --release --example deep_pretraining

use std::path::PathBuf;

use drugner::eval::{run_scenario, ModelConfig};
use drugner::pipeline::{load_auxiliary, load_corpus, PipelineConfig};

fn main() -> drugner::Result<()> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    for name in ["toy_dbn", "toy_sae"] {
        let config = PipelineConfig::load(&root.join(format!("configs/{name}.toml")))?;
        let train = load_corpus(&config.data.train, None)?;
        let test = load_corpus(config.data.test.as_ref().expect("toy configs name a test set"), None)?;
        let aux = load_auxiliary(&config.data.auxiliary)?;
        for pretrain in [true, false] {
            let mut scenario = config.scenario();
            match &mut scenario.model {
                ModelConfig::Dbn(c) => c.pretrain = pretrain,
                ModelConfig::Sae(c) => {
                    // epochs drive per-autoencoder pretraining only
                    if !pretrain {
                        c.epochs = 0;
                    }
                }
                _ => unreachable!(),
            }
            let outcome = run_scenario(&train, &test, &aux, &scenario)?;
            let r = &outcome.report;
            println!(
                "{name} pretrain={pretrain}: P {:.4} R {:.4} F {:.4}",
                r.precision, r.recall, r.f_score
            );
        }
    }
    Ok(())
}
