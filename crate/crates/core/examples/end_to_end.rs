//! Runs pipeline configs end to end, writing every stage artifact.
//!
//! cargo run --release --example end_to_end -- [config.toml ...]

use std::path::PathBuf;

use drugner::pipeline::{cmd_pipeline, GlobalOptions};

fn main() -> drugner::Result<()> {
    let mut configs: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if configs.is_empty() {
        let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
        configs = ["toy_mlp", "toy_lstm"].iter().map(|c| root.join(format!("configs/{c}.toml"))).collect();
    }
    let out = std::env::temp_dir().join("drugner-end-to-end");
    let opts = GlobalOptions {
        out: Some(out),
        jobs: 2,
        ..GlobalOptions::default()
    };
    for result in cmd_pipeline(&configs, &opts)? {
        let r = &result.report;
        println!(
            "{}: P {:.4} R {:.4} F {:.4} ({} extracted, {} gold)",
            result.out.display(),
            r.precision,
            r.recall,
            r.f_score,
            r.true_positive + r.false_positive,
            r.true_positive + r.false_negative
        );
    }
    Ok(())
}
