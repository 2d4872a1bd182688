//! Fully connected feed-forward networks trained by mini-batch gradient
//! descent with momentum and squared-weight decay.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::{EpochRecord, TrainReport};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `½‖a − y‖²` per sample.
    #[default]
    SquaredError,
    /// `−Σ y ln a` for softmax outputs, binary cross-entropy for sigmoid outputs.
    CrossEntropy,
}

/// KL penalty pulling the mean activation of one layer toward `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityPenalty {
    /// Index of the layer whose outputs are penalized.
    pub layer: usize,
    pub target: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Objective {
    pub loss: Loss,
    /// Weight-decay coefficient: adds `λ/2 ΣW²` over weights, never biases.
    pub lambda: f64,
    pub sparsity: Option<SparsityPenalty>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    /// Mean per-sample error, including any sparsity penalty.
    pub data: f64,
    pub reg: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.data + self.reg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `inputs × outputs`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform weights in `±r·√(6 / (fan_in + fan_out))` with `r = 4` for sigmoid
    /// layers and 1 otherwise; zero biases.
    pub fn random(n_in: usize, n_out: usize, activation: Activation, rng: &mut Rng) -> Self {
        let scale = if activation == Activation::Sigmoid { 4.0 } else { 1.0 };
        let r = scale * (6.0 / (n_in + n_out) as f64).sqrt();
        DenseLayer {
            weights: Array2::from_shape_fn((n_in, n_out), |_| rng.random_range(-r..r)),
            bias: Array1::zeros(n_out),
            activation,
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights) + &self.bias;
        self.activation.apply(&mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

impl Network {
    /// `sizes = [input, hidden.., output]`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::random(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect();
        Ok(Network { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::n_out)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = layer.forward(a.view());
        }
        a
    }

    /// Input followed by the output of every layer.
    pub fn forward_all(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap().view());
            acts.push(next);
        }
        acts
    }

    pub fn weight_square_sum(&self) -> f64 {
        self.layers.iter().map(|l| l.weights.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, objective: &Objective) -> LossParts {
        let acts = self.forward_all(x);
        self.loss_from_activations(&acts, targets, objective)
    }

    fn loss_from_activations(&self, acts: &[Array2<f64>], targets: ArrayView2<f64>, objective: &Objective) -> LossParts {
        let m = targets.nrows().max(1) as f64;
        let out = acts.last().unwrap();
        let output_act = self.layers.last().unwrap().activation;
        let data: f64 = match objective.loss {
            Loss::SquaredError => out.iter().zip(targets).map(|(a, y)| 0.5 * (a - y).powi(2)).sum(),
            Loss::CrossEntropy => match output_act {
                Activation::Softmax => -out.iter().zip(targets).map(|(a, y)| y * a.max(1e-300).ln()).sum::<f64>(),
                _ => -out
                    .iter()
                    .zip(targets)
                    .map(|(a, y)| y * a.max(1e-300).ln() + (1.0 - y) * (1.0 - a).max(1e-300).ln())
                    .sum::<f64>(),
            },
        };
        let sparsity = objective.sparsity.map_or(0.0, |sp| {
            let rho_hat = mean_activation(&acts[sp.layer + 1], self.layers[sp.layer].activation);
            sp.beta * rho_hat.iter().map(|&r| kl(sp.target, r)).sum::<f64>()
        });
        LossParts {
            data: data / m + sparsity,
            reg: 0.5 * objective.lambda * self.weight_square_sum(),
        }
    }

    /// Loss and its gradient with respect to every weight and bias.
    pub fn evaluate(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, objective: &Objective) -> (LossParts, Gradients) {
        let acts = self.forward_all(x);
        let parts = self.loss_from_activations(&acts, targets, objective);
        let m = x.nrows().max(1) as f64;
        let n = self.layers.len();
        let out = &acts[n];
        let output_act = self.layers[n - 1].activation;

        // dL/dz of the output layer, per sample (not yet divided by m)
        let mut delta = match (objective.loss, output_act) {
            (Loss::CrossEntropy, Activation::Softmax | Activation::Sigmoid) => out - &targets,
            (Loss::SquaredError, act) => act.backprop(out.view(), &(out - &targets)),
            (Loss::CrossEntropy, act) => {
                let g = ndarray::Zip::from(out)
                    .and(targets)
                    .map_collect(|&a, &y| -y / a.max(1e-300) + (1.0 - y) / (1.0 - a).max(1e-300));
                act.backprop(out.view(), &g)
            }
        };

        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let mut w = acts[l].t().dot(&delta) / m;
            if objective.lambda != 0.0 {
                w.scaled_add(objective.lambda, &layer.weights);
            }
            gw.push(w);
            gb.push(delta.sum_axis(Axis(0)) / m);
            if l == 0 {
                break;
            }
            let mut grad_a = delta.dot(&layer.weights.t());
            if let Some(sp) = objective.sparsity.filter(|sp| sp.layer == l - 1) {
                let below = self.layers[l - 1].activation;
                let rho_hat = mean_activation(&acts[l], below);
                let slope = if below == Activation::Tanh { 0.5 } else { 1.0 };
                let extra = rho_hat.mapv(|r| sp.beta * slope * (-sp.target / r + (1.0 - sp.target) / (1.0 - r)));
                grad_a += &extra;
            }
            delta = self.layers[l - 1].activation.backprop(acts[l].view(), &grad_a);
        }
        gw.reverse();
        gb.reverse();
        (parts, Gradients { weights: gw, biases: gb })
    }
}

/// Mean activation per unit, mapped into (0,1) for tanh units.
fn mean_activation(a: &Array2<f64>, act: Activation) -> Array1<f64> {
    let mean = a.mean_axis(Axis(0)).expect("non-empty batch");
    match act {
        Activation::Tanh => mean.mapv(|v| ((v + 1.0) / 2.0).clamp(1e-12, 1.0 - 1e-12)),
        _ => mean.mapv(|v| v.clamp(1e-12, 1.0 - 1e-12)),
    }
}

fn kl(rho: f64, rho_hat: f64) -> f64 {
    rho * (rho / rho_hat).ln() + (1.0 - rho) * ((1.0 - rho) / (1.0 - rho_hat)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub objective: Objective,
    /// Fraction of inputs zeroed per batch (denoising); 0 disables.
    pub corruption: f64,
    /// Leading layers left untouched by updates.
    pub frozen_layers: usize,
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.corruption) {
            return Err(Error::config("corruption must lie in [0, 1)"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Mini-batch descent with momentum: `v ← μv + η∇J`, `θ ← θ − v`.
///
/// Samples are reshuffled every epoch; a short final batch is kept. Each epoch
/// records the mean of the mini-batch data losses and the decay term at epoch end.
pub fn train_network(
    net: &mut Network,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    options: &TrainOptions,
    rng: &mut Rng,
) -> Result<TrainReport> {
    options.validate()?;
    if inputs.nrows() != targets.nrows() {
        return Err(Error::Dimension {
            expected: inputs.nrows(),
            found: targets.nrows(),
        });
    }
    if inputs.ncols() != net.input_width() {
        return Err(Error::Dimension {
            expected: net.input_width(),
            found: inputs.ncols(),
        });
    }
    if targets.ncols() != net.output_width() {
        return Err(Error::Dimension {
            expected: net.output_width(),
            found: targets.ncols(),
        });
    }
    let started = Instant::now();
    let mut vel_w: Vec<Array2<f64>> = net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect();
    let mut vel_b: Vec<Array1<f64>> = net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect();
    let mut order: Vec<usize> = (0..inputs.nrows()).collect();
    let mut records = Vec::with_capacity(options.epochs);
    for epoch in 1..=options.epochs {
        let epoch_start = Instant::now();
        order.shuffle(rng);
        let mut batch_losses = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(options.batch_size) {
            let mut x = inputs.select(Axis(0), chunk);
            let y = targets.select(Axis(0), chunk);
            if options.corruption > 0.0 {
                x.mapv_inplace(|v| if rng.random::<f64>() < options.corruption { 0.0 } else { v });
            }
            let (parts, grads) = net.evaluate(x.view(), y.view(), &options.objective);
            batch_losses += parts.data;
            n_batches += 1;
            for (l, layer) in net.layers.iter_mut().enumerate().skip(options.frozen_layers) {
                vel_w[l] *= options.momentum;
                vel_w[l].scaled_add(options.learning_rate, &grads.weights[l]);
                layer.weights -= &vel_w[l];
                vel_b[l] *= options.momentum;
                vel_b[l].scaled_add(options.learning_rate, &grads.biases[l]);
                layer.bias -= &vel_b[l];
            }
        }
        let data_loss = if n_batches == 0 { 0.0 } else { batch_losses / n_batches as f64 };
        let reg_loss = 0.5 * options.objective.lambda * net.weight_square_sum();
        if !data_loss.is_finite() || !reg_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        records.push(EpochRecord {
            epoch,
            data_loss,
            reg_loss,
            wall_ms: epoch_start.elapsed().as_millis() as u64,
        });
    }
    Ok(TrainReport {
        epochs: records,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// One-hot rows for zero-based class indices.
pub fn one_hot(classes: &[usize], n_classes: usize) -> Array2<f64> {
    let mut y = Array2::zeros((classes.len(), n_classes));
    for (i, &c) in classes.iter().enumerate() {
        y[[i, c]] = 1.0;
    }
    y
}

/// Arg-max class per row; the first maximum wins.
pub fn argmax_rows(a: &Array2<f64>) -> Vec<usize> {
    a.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    #[test]
    fn forward_matches_hand_computation() {
        let net = Network {
            layers: vec![
                DenseLayer {
                    weights: array![[0.5, -1.0], [2.0, 0.25]],
                    bias: array![0.1, -0.2],
                    activation: Activation::Sigmoid,
                },
                DenseLayer {
                    weights: array![[1.0, -1.0, 0.0], [0.5, 0.5, 2.0]],
                    bias: array![0.0, 0.3, -0.1],
                    activation: Activation::Softmax,
                },
            ],
        };
        let x = array![[1.0, 2.0], [0.0, -1.0], [0.3, 0.3]];
        let out = net.forward(x.view());
        for (r, row) in x.rows().into_iter().enumerate() {
            let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
            let h0 = sig(row[0] * 0.5 + row[1] * 2.0 + 0.1);
            let h1 = sig(-row[0] + row[1] * 0.25 - 0.2);
            let z = [h0 + 0.5 * h1, -h0 + 0.5 * h1 + 0.3, 2.0 * h1 - 0.1];
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            for k in 0..3 {
                assert!((out[[r, k]] - z[k].exp() / denom).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_inputs_give_zero_first_layer_rows() {
        let mut r = rng::seeded(3);
        let net = Network::new(&[4, 3, 2], Activation::Sigmoid, Activation::Softmax, &mut r).unwrap();
        let x = array![[0.0, 0.7, 0.0, -0.2]];
        let y = one_hot(&[1], 2);
        let (_, g) = net.evaluate(x.view(), y.view(), &Objective::default());
        for col in [0, 2] {
            assert!(g.weights[0].row(col).iter().all(|&v| v == 0.0));
        }
        assert!(g.weights[0].row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_momentum_updates_are_plain_gradient_steps() {
        let mut r = rng::seeded(5);
        let net = Network::new(&[3, 4, 2], Activation::Sigmoid, Activation::Softmax, &mut r).unwrap();
        let x = array![[0.2, -0.4, 0.9]];
        let y = one_hot(&[0], 2);
        let options = TrainOptions {
            learning_rate: 0.3,
            momentum: 0.0,
            epochs: 2,
            batch_size: 1,
            objective: Objective { lambda: 0.1, ..Objective::default() },
            corruption: 0.0,
            frozen_layers: 0,
        };
        let mut trained = net.clone();
        train_network(&mut trained, x.view(), y.view(), &options, &mut rng::seeded(0)).unwrap();

        let mut manual = net;
        for _ in 0..2 {
            let (_, g) = manual.evaluate(x.view(), y.view(), &options.objective);
            for (l, layer) in manual.layers.iter_mut().enumerate() {
                layer.weights.scaled_add(-0.3, &g.weights[l]);
                layer.bias.scaled_add(-0.3, &g.biases[l]);
            }
        }
        for (a, b) in trained.layers.iter().zip(&manual.layers) {
            assert!(a.weights.iter().zip(&b.weights).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn frozen_layers_do_not_move() {
        let mut r = rng::seeded(8);
        let net = Network::new(&[2, 3, 2], Activation::Sigmoid, Activation::Softmax, &mut r).unwrap();
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        let y = one_hot(&[0, 1], 2);
        let mut trained = net.clone();
        let options = TrainOptions {
            learning_rate: 0.5,
            momentum: 0.5,
            epochs: 5,
            batch_size: 2,
            objective: Objective::default(),
            corruption: 0.0,
            frozen_layers: 1,
        };
        train_network(&mut trained, x.view(), y.view(), &options, &mut r).unwrap();
        assert_eq!(trained.layers[0], net.layers[0]);
        assert_ne!(trained.layers[1], net.layers[1]);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let mut r = rng::seeded(1);
        let mut net = Network::new(&[1, 1], Activation::Identity, Activation::Identity, &mut r).unwrap();
        let x = array![[1e200]];
        let y = array![[0.0]];
        let options = TrainOptions {
            learning_rate: 1.0,
            momentum: 0.0,
            epochs: 3,
            batch_size: 1,
            objective: Objective::default(),
            corruption: 0.0,
            frozen_layers: 0,
        };
        let err = train_network(&mut net, x.view(), y.view(), &options, &mut r).unwrap_err();
        assert!(matches!(err, Error::Divergence { epoch: 1 }), "{err}");
    }
}
