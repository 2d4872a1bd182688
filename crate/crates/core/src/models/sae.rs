use log::info;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::network::{train_network, DenseLayer, Loss, Network, Objective, SparsityPenalty, TrainOptions};
use super::{Dataset, FineTuneConfig, InputScaling, ModelKind, Scaling, TrainReport, TupleClassifier};
use crate::error::{Error, Result};
use crate::representation::TupleSample;
use crate::rng::{self, Rng};

/// One autoencoder of the stack; its decoder mirrors the input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub hidden: usize,
    pub activation: Activation,
    pub learning_rate: f64,
    pub momentum: f64,
    pub sparsity_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeConfig {
    pub input_width: usize,
    pub autoencoders: Vec<AutoencoderSpec>,
    /// Weight β of the KL sparsity penalty.
    pub sparsity_weight: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of inputs zeroed while training each autoencoder.
    pub corruption: f64,
    pub input_scaling: InputScaling,
    pub fine_tune: FineTuneConfig,
    pub rng_seed: u64,
}

impl Default for SaeConfig {
    fn default() -> Self {
        SaeConfig {
            input_width: 500,
            autoencoders: vec![
                AutoencoderSpec {
                    hidden: 100,
                    activation: Activation::Sigmoid,
                    learning_rate: 1.0,
                    momentum: 0.5,
                    sparsity_target: 0.05,
                },
                AutoencoderSpec {
                    hidden: 100,
                    activation: Activation::Tanh,
                    learning_rate: 2.0,
                    momentum: 0.5,
                    sparsity_target: 0.05,
                },
            ],
            sparsity_weight: 3.0,
            lambda: 0.0,
            epochs: 30,
            batch_size: 100,
            corruption: 0.0,
            input_scaling: InputScaling::Affine,
            fine_tune: FineTuneConfig::default(),
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: DenseLayer,
    /// Sigmoid reconstruction layer.
    pub decoder: DenseLayer,
}

impl Autoencoder {
    pub fn encode(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.encoder.forward(x)
    }

    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.decoder.forward(self.encode(x).view())
    }

    pub fn reconstruction_error(&self, x: ArrayView2<f64>) -> f64 {
        let r = self.reconstruct(x);
        0.5 * (&x - &r).mapv(|d| d * d).sum() / x.nrows().max(1) as f64
    }
}

/// Trains `x → h → x̂` on squared reconstruction error with an optional KL
/// sparsity penalty on `h`.
pub fn train_autoencoder(
    inputs: ArrayView2<f64>,
    spec: &AutoencoderSpec,
    config: &SaeConfig,
    rng: &mut Rng,
) -> Result<(Autoencoder, TrainReport)> {
    let width = inputs.ncols();
    let mut net = Network {
        layers: vec![
            DenseLayer::random(width, spec.hidden, spec.activation, rng),
            DenseLayer::random(spec.hidden, width, Activation::Sigmoid, rng),
        ],
    };
    let sparsity = (config.sparsity_weight > 0.0).then_some(SparsityPenalty {
        layer: 0,
        target: spec.sparsity_target,
        beta: config.sparsity_weight,
    });
    let options = TrainOptions {
        learning_rate: spec.learning_rate,
        momentum: spec.momentum,
        epochs: config.epochs,
        batch_size: config.batch_size,
        objective: Objective {
            loss: Loss::SquaredError,
            lambda: config.lambda,
            sparsity,
        },
        corruption: config.corruption,
        frozen_layers: 0,
    };
    let report = train_network(&mut net, inputs, inputs, &options, rng)?;
    let decoder = net.layers.pop().unwrap();
    let encoder = net.layers.pop().unwrap();
    Ok((Autoencoder { encoder, decoder }, report))
}

pub fn sae_train(tuples: &[TupleSample], config: &SaeConfig) -> Result<(TupleClassifier, TrainReport)> {
    sae_train_dataset(&Dataset::from_tuples(tuples)?, config)
}

/// Trains each autoencoder on the codes of the one below, then fine-tunes the
/// encoder stack under a softmax head.
pub fn sae_train_dataset(data: &Dataset, config: &SaeConfig) -> Result<(TupleClassifier, TrainReport)> {
    if data.is_empty() {
        return Err(Error::data("no training samples"));
    }
    if config.autoencoders.is_empty() {
        return Err(Error::config("an SAE needs at least one autoencoder"));
    }
    if config.input_width != data.width() {
        return Err(Error::config(format!(
            "SAE input width {} but samples are {} wide",
            config.input_width,
            data.width()
        )));
    }
    let scaling = Scaling::fit(config.input_scaling, &data.inputs)?;
    let scaled = scaling.apply(&data.inputs);
    let mut rng = rng::derive(config.rng_seed, "sae");
    let mut codes = scaled.clone();
    let mut layers = Vec::with_capacity(config.autoencoders.len() + 1);
    for (i, spec) in config.autoencoders.iter().enumerate() {
        let (ae, report) = train_autoencoder(codes.view(), spec, config, &mut rng)?;
        info!(
            "sae: autoencoder {} ({}→{}) loss {:.6}",
            i + 1,
            codes.ncols(),
            spec.hidden,
            report.final_loss().unwrap_or(f64::NAN)
        );
        codes = ae.encode(codes.view());
        layers.push(ae.encoder);
    }
    let top = config.autoencoders.last().unwrap().hidden;
    layers.push(DenseLayer::random(top, data.n_classes, Activation::Softmax, &mut rng));
    let mut network = Network { layers };
    let options = config.fine_tune.options(config.autoencoders.len());
    let report = train_network(&mut network, scaled.view(), data.targets().view(), &options, &mut rng)?;
    Ok((
        TupleClassifier {
            kind: ModelKind::Sae,
            scaling,
            network,
        },
        report,
    ))
}
