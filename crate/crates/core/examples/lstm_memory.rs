//! LSTM versus a per-step classifier on a task that needs one step of memory.
//!
//! cargo run --release --example lstm_memory -- [seeds] [epochs]

use drugner::models::{lstm_predict, lstm_train, LstmConfig, SequenceLoss};
use drugner::synthetic::{memory_task, predict_memoryless, token_report, train_memoryless};

fn main() -> drugner::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(3, |s| s.parse().expect("seeds"));
    let epochs: usize = args.next().map_or(3, |s| s.parse().expect("epochs"));
    for seed in 1..=seeds {
        let data = memory_task(5000, 4, seed);
        let (train, test) = data.split_at(4000);
        let config = LstmConfig {
            input_dimension: 4,
            hidden_sizes: vec![4],
            learning_rate: 0.05,
            momentum: 0.9,
            epochs,
            frame: 2,
            loss: SequenceLoss::CrossEntropy,
            rng_seed: seed,
            ..LstmConfig::default()
        };
        let start = std::time::Instant::now();
        let (model, report) = lstm_train(train, &config)?;
        let lstm = token_report(&lstm_predict(&model, test)?, test);
        let baseline_net = train_memoryless(train, 5, seed)?;
        let baseline = token_report(&predict_memoryless(&baseline_net, test), test);
        println!(
            "seed {seed}: lstm F {:.4} (loss {:.4}, {:?}), memoryless F {:.4}",
            lstm.f_score,
            report.final_loss().unwrap_or(f64::NAN),
            start.elapsed(),
            baseline.f_score
        );
    }
    Ok(())
}
