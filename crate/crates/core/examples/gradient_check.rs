//! Finite-difference checks of the MLP, sparse autoencoder, RBM free energy and
//! LSTM gradients.
//!
//! cargo run --release --example gradient_check

use drugner::models::gradcheck::{check_lstm, check_network, check_rbm};
use drugner::models::{
    one_hot, Activation, Loss, LstmConfig, LstmModel, Network, Objective, Rbm, SparsityPenalty,
};
use drugner::representation::{SequenceSample, SequenceStep};
use drugner::rng;
use ndarray::Array2;
use rand::Rng;

const EPSILON: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn main() -> drugner::Result<()> {
    let mut r = rng::seeded(11);
    let x = Array2::from_shape_fn((8, 10), |_| r.random_range(0.0..1.0));
    let classes: Vec<usize> = (0..8).map(|i| i % 6).collect();
    let targets = one_hot(&classes, 6);

    let mlp = Network::new(&[10, 7, 5, 6], Activation::Sigmoid, Activation::Softmax, &mut r)?;
    for (name, objective) in [
        ("mlp squared error", Objective { loss: Loss::SquaredError, lambda: 0.3, sparsity: None }),
        ("mlp cross entropy", Objective { loss: Loss::CrossEntropy, lambda: 0.0, sparsity: None }),
    ] {
        let report = check_network(&mlp, x.view(), targets.view(), &objective, EPSILON, TOLERANCE)?;
        println!("{name:<20} max deviation {:.2e} over {} weights", report.max_deviation, report.checked);
    }

    let autoencoder = Network::new(&[10, 4, 10], Activation::Sigmoid, Activation::Sigmoid, &mut r)?;
    let objective = Objective {
        loss: Loss::SquaredError,
        lambda: 1e-3,
        sparsity: Some(SparsityPenalty { layer: 0, target: 0.05, beta: 3.0 }),
    };
    let report = check_network(&autoencoder, x.view(), x.view(), &objective, EPSILON, TOLERANCE)?;
    println!("{:<20} max deviation {:.2e} over {} weights", "sparse autoencoder", report.max_deviation, report.checked);

    let rbm = Rbm::new(10, 4, &mut r);
    let report = check_rbm(&rbm, x.view(), EPSILON, TOLERANCE)?;
    println!("{:<20} max deviation {:.2e} over {} weights", "rbm free energy", report.max_deviation, report.checked);

    let config = LstmConfig { input_dimension: 4, hidden_sizes: vec![3, 3], ..LstmConfig::default() };
    let lstm = LstmModel::new(&config, &mut r)?;
    let sequence = SequenceSample {
        sentence_id: "g".into(),
        steps: (0..6)
            .map(|i| SequenceStep {
                token: format!("t{i}"),
                features: (0..4).map(|_| r.random_range(-1.0..1.0)).collect(),
                label: u8::from(i % 3 == 1),
            })
            .collect(),
    };
    let report = check_lstm(&lstm, &sequence, EPSILON, TOLERANCE)?;
    println!("{:<20} max deviation {:.2e} over {} weights", "lstm", report.max_deviation, report.checked);
    Ok(())
}
