//! Bernoulli restricted Boltzmann machine trained by contrastive divergence.
//!
//! Real inputs in `[0, 1]` are treated as visible-unit probabilities.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::activation::{sigmoid, softplus};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub cd_steps: usize,
    pub rng_seed: u64,
}

impl Default for RbmConfig {
    fn default() -> Self {
        RbmConfig {
            learning_rate: 1.0,
            momentum: 0.0,
            batch_size: 100,
            epochs: 30,
            cd_steps: 1,
            rng_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rbm {
    /// `visible × hidden`.
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

/// Parameter-shaped triple `(W, b_visible, b_hidden)`.
pub type RbmGradients = (Array2<f64>, Array1<f64>, Array1<f64>);

impl Rbm {
    /// Weights from N(0, 0.01²), zero biases.
    pub fn new(visible: usize, hidden: usize, rng: &mut Rng) -> Self {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        Rbm {
            weights: Array2::from_shape_fn((visible, hidden), |_| normal.sample(rng)),
            visible_bias: Array1::zeros(visible),
            hidden_bias: Array1::zeros(hidden),
        }
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn hidden_probs(&self, v: ArrayView2<f64>) -> Array2<f64> {
        (v.dot(&self.weights) + &self.hidden_bias).mapv(sigmoid)
    }

    pub fn visible_probs(&self, h: ArrayView2<f64>) -> Array2<f64> {
        (h.dot(&self.weights.t()) + &self.visible_bias).mapv(sigmoid)
    }

    /// Mean free energy `F(v) = −bᵀv − Σ_j softplus(c_j + (vW)_j)` over rows.
    pub fn free_energy(&self, v: ArrayView2<f64>) -> f64 {
        let pre = v.dot(&self.weights) + &self.hidden_bias;
        let visible_term = v.dot(&self.visible_bias);
        let total: f64 = visible_term
            .iter()
            .zip(pre.rows())
            .map(|(bv, row)| -bv - row.iter().map(|&x| softplus(x)).sum::<f64>())
            .sum();
        total / v.nrows().max(1) as f64
    }

    /// Gradient of [`Rbm::free_energy`] with respect to `(W, b, c)`.
    pub fn free_energy_gradients(&self, v: ArrayView2<f64>) -> RbmGradients {
        let m = v.nrows().max(1) as f64;
        let h = self.hidden_probs(v);
        (
            -(v.t().dot(&h)) / m,
            -v.sum_axis(Axis(0)) / m,
            -h.sum_axis(Axis(0)) / m,
        )
    }

    /// One contrastive-divergence estimate on a batch: the negative of
    /// `∇F(v₀) − ∇F(v_k)`, plus the reconstruction error `mean ‖v₀ − v_k‖²`.
    ///
    /// The chain starts from sampled hidden states; the reconstruction and the
    /// final hidden statistics use probabilities.
    pub fn contrastive_divergence(&self, v0: ArrayView2<f64>, steps: usize, rng: &mut Rng) -> (RbmGradients, f64) {
        let mut h = sample(&self.hidden_probs(v0), rng);
        let mut vk = self.visible_probs(h.view());
        for _ in 1..steps.max(1) {
            h = sample(&self.hidden_probs(vk.view()), rng);
            vk = self.visible_probs(h.view());
        }
        let (pw, pb, pc) = self.free_energy_gradients(v0);
        let (nw, nb, nc) = self.free_energy_gradients(vk.view());
        let error = (&v0 - &vk).mapv(|d| d * d).sum() / v0.nrows().max(1) as f64;
        ((nw - pw, nb - pb, nc - pc), error)
    }

    /// Mean squared reconstruction error through hidden probabilities.
    pub fn reconstruction_error(&self, v: ArrayView2<f64>) -> f64 {
        let recon = self.visible_probs(self.hidden_probs(v).view());
        (&v - &recon).mapv(|d| d * d).sum() / v.nrows().max(1) as f64
    }
}

fn sample(p: &Array2<f64>, rng: &mut Rng) -> Array2<f64> {
    p.mapv(|q| if rng.random::<f64>() < q { 1.0 } else { 0.0 })
}

/// Trains one RBM on `data` (rows in `[0, 1]`). Returns the machine and the
/// mean per-batch reconstruction error of every epoch.
pub fn rbm_pretrain(data: ArrayView2<f64>, hidden: usize, config: &RbmConfig) -> Result<(Rbm, Vec<f64>)> {
    if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::data(format!("RBM input {v} lies outside [0, 1]")));
    }
    if config.batch_size == 0 || hidden == 0 {
        return Err(Error::config("RBM batch size and hidden width must be positive"));
    }
    let mut rng = rng::derive(config.rng_seed, "rbm");
    let mut rbm = Rbm::new(data.ncols(), hidden, &mut rng);
    let mut vel_w = Array2::<f64>::zeros(rbm.weights.raw_dim());
    let mut vel_b = Array1::<f64>::zeros(rbm.n_visible());
    let mut vel_c = Array1::<f64>::zeros(hidden);
    let mut order: Vec<usize> = (0..data.nrows()).collect();
    let mut errors = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = data.select(Axis(0), chunk);
            let ((gw, gb, gc), err) = rbm.contrastive_divergence(batch.view(), config.cd_steps, &mut rng);
            total += err;
            batches += 1;
            vel_w = vel_w * config.momentum + gw * config.learning_rate;
            vel_b = vel_b * config.momentum + gb * config.learning_rate;
            vel_c = vel_c * config.momentum + gc * config.learning_rate;
            rbm.weights += &vel_w;
            rbm.visible_bias += &vel_b;
            rbm.hidden_bias += &vel_c;
        }
        let mean = if batches == 0 { 0.0 } else { total / batches as f64 };
        if !mean.is_finite() || rbm.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        errors.push(mean);
    }
    Ok((rbm, errors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bars(n: usize, seed: u64) -> Array2<f64> {
        // 4x4 images with one full horizontal or vertical bar
        let mut r = rng::seeded(seed);
        let mut data = Array2::zeros((n, 16));
        for i in 0..n {
            let k = r.random_range(0..4);
            let vertical = r.random::<bool>();
            for j in 0..4 {
                let idx = if vertical { j * 4 + k } else { k * 4 + j };
                data[[i, idx]] = 1.0;
            }
        }
        data
    }

    #[test]
    fn all_zero_data_reconstructs_to_zero() {
        let data = Array2::zeros((50, 6));
        let config = RbmConfig { epochs: 50, batch_size: 10, ..RbmConfig::default() };
        let (rbm, errors) = rbm_pretrain(data.view(), 3, &config).unwrap();
        assert!(errors.last().unwrap() < &1e-3, "{errors:?}");
        assert!(rbm.reconstruction_error(data.view()) < 1e-3);
    }

    #[test]
    fn reconstruction_improves_on_bars() {
        let data = bars(400, 2);
        let config = RbmConfig { epochs: 30, batch_size: 20, learning_rate: 0.1, momentum: 0.5, ..RbmConfig::default() };
        let (_, errors) = rbm_pretrain(data.view(), 8, &config).unwrap();
        let first: f64 = errors[..10].iter().sum::<f64>() / 10.0;
        let last: f64 = errors[20..].iter().sum::<f64>() / 10.0;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn training_vectors_have_lower_free_energy_than_noise() {
        let data = bars(400, 3);
        let config = RbmConfig { epochs: 30, batch_size: 20, learning_rate: 0.1, momentum: 0.5, ..RbmConfig::default() };
        let (rbm, _) = rbm_pretrain(data.view(), 8, &config).unwrap();
        let mut r = rng::seeded(9);
        let noise = Array2::from_shape_fn((400, 16), |_| if r.random::<f64>() < 0.25 { 1.0 } else { 0.0 });
        assert!(rbm.free_energy(data.view()) < rbm.free_energy(noise.view()));
    }

    #[test]
    fn rejects_unscaled_input() {
        let data = Array2::from_elem((2, 2), -0.5);
        assert!(matches!(rbm_pretrain(data.view(), 2, &RbmConfig::default()), Err(Error::Data(_))));
    }

    #[test]
    fn stays_finite_at_unit_learning_rate() {
        let data = bars(200, 5);
        let config = RbmConfig { epochs: 50, ..RbmConfig::default() };
        let (rbm, _) = rbm_pretrain(data.view(), 10, &config).unwrap();
        assert!(rbm.weights.iter().all(|w| w.is_finite()));
    }
}
