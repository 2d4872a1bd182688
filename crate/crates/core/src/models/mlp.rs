use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::network::{train_network, Loss, Network, Objective, TrainOptions};
use super::{Dataset, ModelKind, Prediction, Scaling, TrainReport, TupleClassifier};
use crate::embedding::{mean_pairwise_euclidean, PairNormalization, PAD_TOKEN};
use crate::error::{Error, Result};
use crate::representation::{TupleSample, N_CLASSES, TUPLE_WIDTH};
use crate::rng;

/// Weight-decay setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// λ = 0
    L0,
    /// λ = 1
    L1,
    /// λ = mean pairwise euclidean distance of the training token vectors.
    #[default]
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub loss: Loss,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub regularization: Regularization,
    pub pair_normalization: PairNormalization,
    pub rng_seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            layer_sizes: vec![500, 100, 100, N_CLASSES],
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Softmax,
            loss: Loss::SquaredError,
            learning_rate: 1.0,
            momentum: 0.5,
            epochs: 100,
            batch_size: 100,
            regularization: Regularization::L2,
            pair_normalization: PairNormalization::Literal,
            rng_seed: 1,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self, input_width: usize, n_classes: usize) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::config("an MLP needs at least input and output layers"));
        }
        if self.layer_sizes[0] != input_width {
            return Err(Error::config(format!(
                "input layer has {} nodes but samples are {input_width} wide",
                self.layer_sizes[0]
            )));
        }
        if *self.layer_sizes.last().unwrap() != n_classes {
            return Err(Error::config(format!("output layer must have {n_classes} nodes")));
        }
        Ok(())
    }
}

/// λ for the L2 setting: mean pairwise euclidean distance between the distinct
/// token vectors found in the tuples (pad excluded), taken in first-seen order.
pub fn l2_lambda(tuples: &[TupleSample], normalization: PairNormalization) -> Result<f64> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut vectors: Vec<&[f32]> = Vec::new();
    for t in tuples {
        let d = t.vector.len() / TUPLE_WIDTH;
        for (i, token) in t.tokens.iter().enumerate() {
            if token == PAD_TOKEN || seen.contains_key(token.as_str()) {
                continue;
            }
            seen.insert(token, vectors.len());
            vectors.push(&t.vector[i * d..(i + 1) * d]);
        }
    }
    mean_pairwise_euclidean(&vectors, normalization)
}

fn resolve_lambda(tuples: Option<&[TupleSample]>, data: &Dataset, config: &MlpConfig) -> Result<f64> {
    Ok(match config.regularization {
        Regularization::L0 => 0.0,
        Regularization::L1 => 1.0,
        Regularization::L2 => match tuples {
            Some(t) => l2_lambda(t, config.pair_normalization)?,
            None => {
                let rows: Vec<Vec<f64>> = data.inputs.rows().into_iter().map(|r| r.to_vec()).collect();
                mean_pairwise_euclidean(&rows, config.pair_normalization)?
            }
        },
    })
}

pub fn mlp_train(tuples: &[TupleSample], config: &MlpConfig) -> Result<(TupleClassifier, TrainReport)> {
    let data = Dataset::from_tuples(tuples)?;
    let lambda = resolve_lambda(Some(tuples), &data, config)?;
    train_with_lambda(&data, config, lambda)
}

/// As [`mlp_train`] on a bare dataset; the L2 λ is taken over its rows.
pub fn mlp_train_dataset(data: &Dataset, config: &MlpConfig) -> Result<(TupleClassifier, TrainReport)> {
    let lambda = resolve_lambda(None, data, config)?;
    train_with_lambda(data, config, lambda)
}

fn train_with_lambda(data: &Dataset, config: &MlpConfig, lambda: f64) -> Result<(TupleClassifier, TrainReport)> {
    if data.is_empty() {
        return Err(Error::data("no training samples"));
    }
    config.validate(data.width(), data.n_classes)?;
    info!("mlp: {} samples, λ = {lambda:.6}", data.len());
    let mut rng = rng::derive(config.rng_seed, "mlp");
    let mut network = Network::new(&config.layer_sizes, config.hidden_activation, config.output_activation, &mut rng)?;
    let options = TrainOptions {
        learning_rate: config.learning_rate,
        momentum: config.momentum,
        epochs: config.epochs,
        batch_size: config.batch_size,
        objective: Objective {
            loss: config.loss,
            lambda,
            sparsity: None,
        },
        corruption: 0.0,
        frozen_layers: 0,
    };
    let report = train_network(&mut network, data.inputs.view(), data.targets().view(), &options, &mut rng)?;
    let classifier = TupleClassifier {
        kind: ModelKind::Mlp,
        scaling: Scaling::Identity,
        network,
    };
    Ok((classifier, report))
}

pub fn mlp_predict(classifier: &TupleClassifier, tuples: &[TupleSample]) -> Result<Vec<Prediction>> {
    classifier.predict(tuples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn xor() -> Dataset {
        Dataset::new(array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], vec![0, 1, 1, 0], 6).unwrap()
    }

    fn small_config(regularization: Regularization) -> MlpConfig {
        MlpConfig {
            layer_sizes: vec![2, 8, 6],
            learning_rate: 1.0,
            momentum: 0.5,
            epochs: 2000,
            batch_size: 4,
            regularization,
            rng_seed: 7,
            ..MlpConfig::default()
        }
    }

    #[test]
    fn learns_xor() {
        let data = xor();
        let (model, report) = mlp_train_dataset(&data, &small_config(Regularization::L0)).unwrap();
        assert_eq!(model.accuracy(&data), 1.0);
        assert_eq!(report.epochs.len(), 2000);
    }

    #[test]
    fn weight_decay_shrinks_weights() {
        let data = xor();
        let mut config = small_config(Regularization::L0);
        config.epochs = 200;
        let (plain, _) = mlp_train_dataset(&data, &config).unwrap();
        config.regularization = Regularization::L1;
        let (decayed, report) = mlp_train_dataset(&data, &config).unwrap();
        assert!(decayed.network.weight_square_sum() < plain.network.weight_square_sum());
        assert!(report.epochs.iter().all(|e| e.reg_loss >= 0.0 && e.data_loss >= 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let mut config = small_config(Regularization::L2);
        config.epochs = 20;
        let a = mlp_train_dataset(&xor(), &config).unwrap();
        let b = mlp_train_dataset(&xor(), &config).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.losses(), b.1.losses());
    }

    #[test]
    fn l2_lambda_uses_distinct_tokens() {
        let t = |tokens: [&str; 5], v: [f32; 5]| TupleSample {
            tokens: tokens.map(String::from).to_vec(),
            label: 1,
            vector: v.to_vec(),
        };
        // D = 1: tokens a=0, b=3, c=1, pad excluded
        let tuples = vec![t(["a", "b", "c", "*", "*"], [0.0, 3.0, 1.0, 0.0, 0.0]), t(["b", "a", "a", "c", "b"], [3.0, 0.0, 0.0, 1.0, 3.0])];
        let lambda = l2_lambda(&tuples, PairNormalization::Literal).unwrap();
        assert!((lambda - (3.0 + 1.0 + 2.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn posteriors_sum_to_one() {
        let mut config = small_config(Regularization::L0);
        config.epochs = 3;
        let (model, _) = mlp_train_dataset(&xor(), &config).unwrap();
        for p in model.predict_inputs(&array![[0.3, -2.0], [10.0, 4.0]]) {
            assert!((p.posteriors.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!((1..=6).contains(&p.class));
        }
    }

    #[test]
    fn width_mismatch_is_config_error() {
        let err = mlp_train_dataset(&xor(), &MlpConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
