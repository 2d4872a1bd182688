use log::info;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::network::{train_network, DenseLayer, Network};
use super::rbm::{rbm_pretrain, RbmConfig};
use super::{Dataset, FineTuneConfig, InputScaling, ModelKind, Scaling, TrainReport, TupleClassifier};
use crate::error::{Error, Result};
use crate::representation::TupleSample;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbnConfig {
    /// `(visible, hidden)` per RBM, bottom first.
    pub rbm_sizes: Vec<(usize, usize)>,
    pub rbm: RbmConfig,
    /// When false the stack starts from random weights (for comparisons).
    pub pretrain: bool,
    pub input_scaling: InputScaling,
    pub fine_tune: FineTuneConfig,
    pub rng_seed: u64,
}

impl Default for DbnConfig {
    fn default() -> Self {
        DbnConfig {
            rbm_sizes: vec![(500, 100), (100, 100)],
            rbm: RbmConfig::default(),
            pretrain: true,
            input_scaling: InputScaling::Affine,
            fine_tune: FineTuneConfig::default(),
            rng_seed: 1,
        }
    }
}

impl DbnConfig {
    pub fn validate(&self, input_width: usize) -> Result<()> {
        let Some(first) = self.rbm_sizes.first() else {
            return Err(Error::config("a DBN needs at least one RBM"));
        };
        if first.0 != input_width {
            return Err(Error::config(format!(
                "first RBM has {} visible units but samples are {input_width} wide",
                first.0
            )));
        }
        for pair in self.rbm_sizes.windows(2) {
            if pair[0].1 != pair[1].0 {
                return Err(Error::config(format!(
                    "RBM sizes do not chain: hidden {} feeds visible {}",
                    pair[0].1, pair[1].0
                )));
            }
        }
        Ok(())
    }
}

pub fn dbn_train(tuples: &[TupleSample], config: &DbnConfig) -> Result<(TupleClassifier, TrainReport)> {
    dbn_train_dataset(&Dataset::from_tuples(tuples)?, config)
}

/// Greedy layer-wise RBM pretraining, then supervised fine-tuning of the
/// stacked encoders under a freshly initialized softmax head.
pub fn dbn_train_dataset(data: &Dataset, config: &DbnConfig) -> Result<(TupleClassifier, TrainReport)> {
    if data.is_empty() {
        return Err(Error::data("no training samples"));
    }
    config.validate(data.width())?;
    let scaling = Scaling::fit(config.input_scaling, &data.inputs)?;
    let scaled = scaling.apply(&data.inputs);
    let mut rng = rng::derive(config.rng_seed, "dbn");
    let mut layers = Vec::with_capacity(config.rbm_sizes.len() + 1);
    let mut features = scaled.clone();
    for (i, &(visible, hidden)) in config.rbm_sizes.iter().enumerate() {
        let layer = if config.pretrain {
            let rbm_config = RbmConfig {
                rng_seed: config.rng_seed.wrapping_add(i as u64),
                ..config.rbm.clone()
            };
            let (rbm, errors) = rbm_pretrain(features.view(), hidden, &rbm_config)?;
            info!(
                "dbn: rbm {} ({visible}→{hidden}) reconstruction error {:.6} → {:.6}",
                i + 1,
                errors.first().copied().unwrap_or(f64::NAN),
                errors.last().copied().unwrap_or(f64::NAN)
            );
            features = rbm.hidden_probs(features.view());
            DenseLayer {
                weights: rbm.weights,
                bias: rbm.hidden_bias,
                activation: Activation::Sigmoid,
            }
        } else {
            DenseLayer::random(visible, hidden, Activation::Sigmoid, &mut rng)
        };
        layers.push(layer);
    }
    let top = config.rbm_sizes.last().unwrap().1;
    layers.push(DenseLayer::random(top, data.n_classes, Activation::Softmax, &mut rng));
    let mut network = Network { layers };
    let options = config.fine_tune.options(config.rbm_sizes.len());
    let report = train_network(&mut network, scaled.view(), data.targets().view(), &options, &mut rng)?;
    Ok((
        TupleClassifier {
            kind: ModelKind::Dbn,
            scaling,
            network,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::N_CLASSES;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng as _;

    /// Two classes split by the sign of the first feature, features in [-1, 1].
    fn separable(n: usize, width: usize, seed: u64) -> Dataset {
        let mut r = rng::seeded(seed);
        let inputs = Array2::from_shape_fn((n, width), |_| r.random_range(-1.0..1.0));
        let classes = inputs.column(0).iter().map(|&v| usize::from(v > 0.0)).collect();
        Dataset::new(inputs, classes, N_CLASSES).unwrap()
    }

    fn config(width: usize) -> DbnConfig {
        DbnConfig {
            rbm_sizes: vec![(width, 12), (12, 12)],
            rbm: RbmConfig { epochs: 10, batch_size: 20, ..RbmConfig::default() },
            fine_tune: FineTuneConfig { epochs: 60, batch_size: 20, ..FineTuneConfig::default() },
            ..DbnConfig::default()
        }
    }

    #[test]
    fn frozen_random_stack_still_separates() {
        let data = separable(300, 6, 1);
        let mut c = config(6);
        c.rbm_sizes = vec![(6, 40), (40, 40)];
        c.pretrain = false;
        c.fine_tune.freeze_pretrained = true;
        c.fine_tune.epochs = 200;
        let (model, _) = dbn_train_dataset(&data, &c).unwrap();
        assert!(model.accuracy(&data) > 0.9, "{}", model.accuracy(&data));
    }

    #[test]
    fn pretrained_dbn_fits_toy_data() {
        let data = separable(300, 6, 2);
        let (model, report) = dbn_train_dataset(&data, &config(6)).unwrap();
        assert!(model.accuracy(&data) > 0.9, "{}", model.accuracy(&data));
        assert_eq!(report.epochs.len(), 60);
    }

    #[test]
    fn chain_mismatch_is_rejected() {
        let mut c = config(6);
        c.rbm_sizes = vec![(6, 12), (10, 4)];
        assert!(matches!(dbn_train_dataset(&separable(10, 6, 3), &c), Err(Error::Config(_))));
    }
}
