//! Classifiers: a multilayer perceptron, a deep belief network, a stacked sparse
//! autoencoder and a peephole LSTM tagger, all trained from scratch.

mod activation;
pub mod checkpoint;
mod dbn;
pub mod gradcheck;
mod lstm;
mod mlp;
mod network;
mod rbm;
mod sae;

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{TupleSample, N_CLASSES};

pub use activation::{sigmoid, softplus, Activation};
pub use dbn::{dbn_train, dbn_train_dataset, DbnConfig};
pub use lstm::{
    lstm_predict, lstm_train, LstmConfig, LstmLayer, LstmModel, LstmTrace, SequenceLoss,
};
pub use mlp::{l2_lambda, mlp_predict, mlp_train, mlp_train_dataset, MlpConfig, Regularization};
pub use network::{
    argmax_rows, one_hot, train_network, DenseLayer, Gradients, Loss, LossParts, Network, Objective,
    SparsityPenalty, TrainOptions,
};
pub use rbm::{rbm_pretrain, Rbm, RbmConfig};
pub use sae::{sae_train, sae_train_dataset, train_autoencoder, Autoencoder, SaeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Mlp,
    Dbn,
    Sae,
    Lstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Dbn => "dbn",
            ModelKind::Sae => "sae",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "dbn" => Ok(ModelKind::Dbn),
            "sae" => Ok(ModelKind::Sae),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data_loss: f64,
    pub reg_loss: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub wall_ms: u64,
}

impl TrainReport {
    /// `(data, reg)` per epoch; unlike the full report this is reproducible bit for bit.
    pub fn losses(&self) -> Vec<(f64, f64)> {
        self.epochs.iter().map(|e| (e.data_loss, e.reg_loss)).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.data_loss + e.reg_loss)
    }

    /// Tab-separated log, one line per epoch.
    pub fn to_log(&self) -> String {
        let mut out = String::from("epoch\tdata_loss\treg_loss\twall_ms\n");
        for e in &self.epochs {
            out.push_str(&format!("{}\t{:.6e}\t{:.6e}\t{}\n", e.epoch, e.data_loss, e.reg_loss, e.wall_ms));
        }
        out
    }
}

/// Feature matrix with zero-based class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub classes: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, classes: Vec<usize>, n_classes: usize) -> Result<Self> {
        if inputs.nrows() != classes.len() {
            return Err(Error::Dimension {
                expected: inputs.nrows(),
                found: classes.len(),
            });
        }
        if let Some(c) = classes.iter().find(|&&c| c >= n_classes) {
            return Err(Error::data(format!("class index {c} outside 0..{n_classes}")));
        }
        Ok(Dataset { inputs, classes, n_classes })
    }

    /// Tuple vectors with labels 1..=6 mapped to classes 0..=5.
    pub fn from_tuples(tuples: &[TupleSample]) -> Result<Self> {
        let width = tuples.first().map_or(0, |t| t.vector.len());
        let mut inputs = Array2::zeros((tuples.len(), width));
        let mut classes = Vec::with_capacity(tuples.len());
        for (i, t) in tuples.iter().enumerate() {
            if t.vector.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    found: t.vector.len(),
                });
            }
            if !(1..=N_CLASSES as u8).contains(&t.label) {
                return Err(Error::data(format!("tuple label {} outside 1..=6", t.label)));
            }
            for (dst, &v) in inputs.row_mut(i).iter_mut().zip(&t.vector) {
                *dst = f64::from(v);
            }
            classes.push(t.class_index());
        }
        Dataset::new(inputs, classes, N_CLASSES)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn targets(&self) -> Array2<f64> {
        one_hot(&self.classes, self.n_classes)
    }
}

/// How raw embedding features are brought into `[0, 1]` before RBM or
/// autoencoder layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScaling {
    /// `x ↦ (x + 1) / 2`; values that land outside `[0, 1]` are a data error.
    #[default]
    Affine,
    /// Per-feature min-max fitted on the training data, clamped at prediction.
    MinMax,
}

/// A fitted input transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scaling {
    Identity,
    Affine,
    MinMax { min: Vec<f64>, max: Vec<f64> },
}

impl Scaling {
    pub fn fit(mode: InputScaling, inputs: &Array2<f64>) -> Result<Self> {
        let scaling = match mode {
            InputScaling::Affine => Scaling::Affine,
            InputScaling::MinMax => {
                let min = inputs.columns().into_iter().map(|c| c.fold(f64::INFINITY, |m, &v| m.min(v))).collect();
                let max = inputs.columns().into_iter().map(|c| c.fold(f64::NEG_INFINITY, |m, &v| m.max(v))).collect();
                Scaling::MinMax { min, max }
            }
        };
        let scaled = scaling.apply(inputs);
        if let Some(v) = scaled.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::data(format!("scaled input {v} lies outside [0, 1]")));
        }
        Ok(scaling)
    }

    pub fn apply(&self, inputs: &Array2<f64>) -> Array2<f64> {
        match self {
            Scaling::Identity => inputs.clone(),
            Scaling::Affine => inputs.mapv(|v| (v + 1.0) / 2.0),
            Scaling::MinMax { min, max } => {
                let mut out = inputs.clone();
                for mut row in out.rows_mut() {
                    for ((v, lo), hi) in row.iter_mut().zip(min).zip(max) {
                        let span = hi - lo;
                        *v = if span > 0.0 { ((*v - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
                    }
                }
                out
            }
        }
    }
}

/// Predicted class (1..=6) and the softmax posteriors for one tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: u8,
    pub posteriors: Vec<f64>,
}

/// A trained tuple classifier: optional input scaling followed by a network
/// with a softmax head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleClassifier {
    pub kind: ModelKind,
    pub scaling: Scaling,
    pub network: Network,
}

impl TupleClassifier {
    pub fn predict_inputs(&self, inputs: &Array2<f64>) -> Vec<Prediction> {
        let out = self.network.forward(self.scaling.apply(inputs).view());
        argmax_rows(&out)
            .into_iter()
            .zip(out.rows())
            .map(|(c, row)| Prediction {
                class: c as u8 + 1,
                posteriors: row.to_vec(),
            })
            .collect()
    }

    pub fn predict(&self, tuples: &[TupleSample]) -> Result<Vec<Prediction>> {
        if tuples.is_empty() {
            return Ok(Vec::new());
        }
        let data = tuple_inputs(tuples, self.network.input_width())?;
        Ok(self.predict_inputs(&data))
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            warn!("accuracy of an empty dataset");
            return 0.0;
        }
        let predicted = argmax_rows(&self.network.forward(self.scaling.apply(&data.inputs).view()));
        let hits = predicted.iter().zip(&data.classes).filter(|(p, c)| p == c).count();
        hits as f64 / data.len() as f64
    }
}

/// Input matrix of unlabeled or labeled tuples, checking the width.
pub(crate) fn tuple_inputs(tuples: &[TupleSample], width: usize) -> Result<Array2<f64>> {
    let mut inputs = Array2::zeros((tuples.len(), width));
    for (i, t) in tuples.iter().enumerate() {
        if t.vector.len() != width {
            return Err(Error::Dimension {
                expected: width,
                found: t.vector.len(),
            });
        }
        for (dst, &v) in inputs.row_mut(i).iter_mut().zip(&t.vector) {
            *dst = f64::from(v);
        }
    }
    Ok(inputs)
}

/// Fine-tuning hyperparameters for pretrained stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FineTuneConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    pub lambda: f64,
    /// Keep the pretrained layers fixed and train only the head.
    pub freeze_pretrained: bool,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            learning_rate: 1.0,
            momentum: 0.5,
            epochs: 100,
            batch_size: 100,
            loss: Loss::SquaredError,
            lambda: 0.0,
            freeze_pretrained: false,
        }
    }
}

impl FineTuneConfig {
    pub(crate) fn options(&self, frozen_layers: usize) -> TrainOptions {
        TrainOptions {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
            objective: Objective {
                loss: self.loss,
                lambda: self.lambda,
                sparsity: None,
            },
            corruption: 0.0,
            frozen_layers: if self.freeze_pretrained { frozen_layers } else { 0 },
        }
    }
}
