//! Stacked peephole LSTM tagger with a coupled input/forget gate:
//!
//! ```text
//! f = σ(W_f x + U_f h₋ + p_f ⊙ c₋ + b_f)      i = 1 − f
//! g = tanh(W_g x + U_g h₋ + b_g)
//! c = f ⊙ c₋ + i ⊙ g
//! o = σ(W_o x + U_o h₋ + p_o ⊙ c + b_o)
//! h = o ⊙ tanh(c)
//! y = σ(w_y · h_top + b_y)
//! ```

use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::{EpochRecord, TrainReport};
use crate::error::{Error, Result};
use crate::representation::SequenceSample;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceLoss {
    /// `½(y − label)²` per step.
    #[default]
    SquaredError,
    /// Binary cross-entropy per step.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub input_dimension: usize,
    /// Width of each stacked hidden layer, bottom first.
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    /// Time steps each output's error is propagated through.
    pub frame: usize,
    pub loss: SequenceLoss,
    pub threshold: f64,
    pub rng_seed: u64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            input_dimension: 200,
            hidden_sizes: vec![2, 2],
            learning_rate: 0.001,
            momentum: 0.9,
            epochs: 30,
            frame: 2,
            loss: SequenceLoss::SquaredError,
            threshold: 0.5,
            rng_seed: 1,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dimension == 0 || self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::config("LSTM needs a positive input width and at least one non-empty hidden layer"));
        }
        if self.frame == 0 {
            return Err(Error::config("LSTM frame must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("LSTM learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    /// `hidden × input`
    pub w_f: Array2<f64>,
    pub w_g: Array2<f64>,
    pub w_o: Array2<f64>,
    /// `hidden × hidden`
    pub u_f: Array2<f64>,
    pub u_g: Array2<f64>,
    pub u_o: Array2<f64>,
    pub p_f: Array1<f64>,
    pub p_o: Array1<f64>,
    pub b_f: Array1<f64>,
    pub b_g: Array1<f64>,
    pub b_o: Array1<f64>,
}

impl LstmLayer {
    fn zeros(n_in: usize, hidden: usize) -> Self {
        let m = || Array2::zeros((hidden, n_in));
        let u = || Array2::zeros((hidden, hidden));
        let v = || Array1::zeros(hidden);
        LstmLayer {
            w_f: m(),
            w_g: m(),
            w_o: m(),
            u_f: u(),
            u_g: u(),
            u_o: u(),
            p_f: v(),
            p_o: v(),
            b_f: v(),
            b_g: v(),
            b_o: v(),
        }
    }

    /// Weights and peepholes uniform in `±√(6 / (n_in + 2·hidden))`, zero biases.
    fn random(n_in: usize, hidden: usize, rng: &mut Rng) -> Self {
        let r = (6.0 / (n_in + 2 * hidden) as f64).sqrt();
        let mut layer = LstmLayer::zeros(n_in, hidden);
        for t in [&mut layer.w_f, &mut layer.w_g, &mut layer.w_o, &mut layer.u_f, &mut layer.u_g, &mut layer.u_o] {
            t.mapv_inplace(|_| rng.random_range(-r..r));
        }
        for t in [&mut layer.p_f, &mut layer.p_o] {
            t.mapv_inplace(|_| rng.random_range(-r..r));
        }
        layer
    }

    pub fn hidden(&self) -> usize {
        self.b_f.len()
    }

    pub fn input_width(&self) -> usize {
        self.w_f.ncols()
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 11] {
        fn m(a: &mut Array2<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        fn v(a: &mut Array1<f64>) -> &mut [f64] {
            a.as_slice_mut().expect("standard layout")
        }
        [
            ("w_f", m(&mut self.w_f)),
            ("w_g", m(&mut self.w_g)),
            ("w_o", m(&mut self.w_o)),
            ("u_f", m(&mut self.u_f)),
            ("u_g", m(&mut self.u_g)),
            ("u_o", m(&mut self.u_o)),
            ("p_f", v(&mut self.p_f)),
            ("p_o", v(&mut self.p_o)),
            ("b_f", v(&mut self.b_f)),
            ("b_g", v(&mut self.b_g)),
            ("b_o", v(&mut self.b_o)),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub layers: Vec<LstmLayer>,
    pub w_out: Array1<f64>,
    /// Single-element output bias.
    pub b_out: Array1<f64>,
    pub loss: SequenceLoss,
    pub threshold: f64,
}

struct StepCache {
    x: Array1<f64>,
    h_prev: Array1<f64>,
    c_prev: Array1<f64>,
    f: Array1<f64>,
    g: Array1<f64>,
    o: Array1<f64>,
    c: Array1<f64>,
    tanh_c: Array1<f64>,
}

struct ForwardPass {
    /// `[time][layer]`
    steps: Vec<Vec<StepCache>>,
    /// Top-layer hidden state per step.
    top: Vec<Array1<f64>>,
    outputs: Vec<f64>,
}

/// Forget and input gate activations per step and layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTrace {
    /// `[time][layer]`
    pub forget: Vec<Vec<Array1<f64>>>,
    pub input: Vec<Vec<Array1<f64>>>,
    pub outputs: Vec<f64>,
}

impl LstmModel {
    pub fn new(config: &LstmConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.hidden_sizes.len());
        let mut n_in = config.input_dimension;
        for &h in &config.hidden_sizes {
            layers.push(LstmLayer::random(n_in, h, rng));
            n_in = h;
        }
        let r = (6.0 / (n_in + 1) as f64).sqrt();
        Ok(LstmModel {
            layers,
            w_out: Array1::from_shape_fn(n_in, |_| rng.random_range(-r..r)),
            b_out: Array1::zeros(1),
            loss: config.loss,
            threshold: config.threshold,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    fn zeros_like(&self) -> Self {
        LstmModel {
            layers: self.layers.iter().map(|l| LstmLayer::zeros(l.input_width(), l.hidden())).collect(),
            w_out: Array1::zeros(self.w_out.len()),
            b_out: Array1::zeros(1),
            loss: self.loss,
            threshold: self.threshold,
        }
    }

    /// Every parameter tensor with a stable name, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, t) in layer.tensors_mut() {
                out.push((format!("layer{i}.{name}"), t));
            }
        }
        out.push(("w_out".into(), self.w_out.as_slice_mut().unwrap()));
        out.push(("b_out".into(), self.b_out.as_slice_mut().unwrap()));
        out
    }

    fn check_width(&self, sequence: &SequenceSample) -> Result<()> {
        let width = self.input_width();
        match sequence.steps.iter().find(|s| s.features.len() != width) {
            Some(step) => Err(Error::Dimension {
                expected: width,
                found: step.features.len(),
            }),
            None => Ok(()),
        }
    }

    fn forward(&self, sequence: &SequenceSample) -> ForwardPass {
        let n_layers = self.layers.len();
        let mut h: Vec<Array1<f64>> = self.layers.iter().map(|l| Array1::zeros(l.hidden())).collect();
        let mut c = h.clone();
        let mut steps = Vec::with_capacity(sequence.len());
        let mut top = Vec::with_capacity(sequence.len());
        let mut outputs = Vec::with_capacity(sequence.len());
        for step in &sequence.steps {
            let mut x: Array1<f64> = step.features.iter().map(|&v| f64::from(v)).collect();
            let mut caches = Vec::with_capacity(n_layers);
            for (l, layer) in self.layers.iter().enumerate() {
                let h_prev = std::mem::take(&mut h[l]);
                let c_prev = std::mem::take(&mut c[l]);
                let f = (layer.w_f.dot(&x) + layer.u_f.dot(&h_prev) + &layer.p_f * &c_prev + &layer.b_f).mapv(sigmoid);
                let g = (layer.w_g.dot(&x) + layer.u_g.dot(&h_prev) + &layer.b_g).mapv(f64::tanh);
                let c_new = &f * &c_prev + &f.mapv(|v| 1.0 - v) * &g;
                let o = (layer.w_o.dot(&x) + layer.u_o.dot(&h_prev) + &layer.p_o * &c_new + &layer.b_o).mapv(sigmoid);
                let tanh_c = c_new.mapv(f64::tanh);
                let h_new = &o * &tanh_c;
                h[l] = h_new.clone();
                c[l] = c_new.clone();
                caches.push(StepCache {
                    x,
                    h_prev,
                    c_prev,
                    f,
                    g,
                    o,
                    c: c_new,
                    tanh_c,
                });
                x = h_new;
            }
            outputs.push(sigmoid(self.w_out.dot(&x) + self.b_out[0]));
            top.push(x);
            steps.push(caches);
        }
        ForwardPass { steps, top, outputs }
    }

    /// Per-step probability of the drug class.
    pub fn probabilities(&self, sequence: &SequenceSample) -> Vec<f64> {
        self.forward(sequence).outputs
    }

    pub fn trace(&self, sequence: &SequenceSample) -> LstmTrace {
        let pass = self.forward(sequence);
        LstmTrace {
            forget: pass.steps.iter().map(|s| s.iter().map(|c| c.f.clone()).collect()).collect(),
            input: pass.steps.iter().map(|s| s.iter().map(|c| c.f.mapv(|v| 1.0 - v)).collect()).collect(),
            outputs: pass.outputs,
        }
    }

    pub fn predict(&self, sequence: &SequenceSample) -> Vec<u8> {
        self.probabilities(sequence)
            .into_iter()
            .map(|p| u8::from(p >= self.threshold))
            .collect()
    }

    fn step_loss(&self, y: f64, label: f64) -> (f64, f64) {
        match self.loss {
            SequenceLoss::SquaredError => (0.5 * (y - label).powi(2), (y - label) * y * (1.0 - y)),
            SequenceLoss::CrossEntropy => {
                let l = -(label * y.max(1e-300).ln() + (1.0 - label) * (1.0 - y).max(1e-300).ln());
                (l, y - label)
            }
        }
    }

    /// Summed per-step loss over the sentence.
    pub fn sequence_loss(&self, sequence: &SequenceSample) -> f64 {
        self.forward(sequence)
            .outputs
            .iter()
            .zip(&sequence.steps)
            .map(|(&y, s)| self.step_loss(y, f64::from(s.label)).0)
            .sum()
    }

    /// Loss and gradients for one sentence. Each output's error flows back
    /// through at most `frame` steps; with `frame ≥ len` this is exact BPTT.
    pub fn gradients(&self, sequence: &SequenceSample, frame: usize) -> (f64, LstmModel) {
        let pass = self.forward(sequence);
        let mut grads = self.zeros_like();
        let mut loss = 0.0;
        let mut seeds = Vec::with_capacity(sequence.len());
        for (t, (&y, step)) in pass.outputs.iter().zip(&sequence.steps).enumerate() {
            let (l, dz) = self.step_loss(y, f64::from(step.label));
            loss += l;
            grads.w_out.scaled_add(dz, &pass.top[t]);
            grads.b_out[0] += dz;
            seeds.push(dz);
        }
        let n = sequence.len();
        if n == 0 {
            return (loss, grads);
        }
        if frame >= n {
            self.backward(&pass, &seeds, 0, n - 1, &mut grads);
        } else {
            let mut single = vec![0.0; n];
            for t in 0..n {
                single[t] = seeds[t];
                self.backward(&pass, &single, (t + 1).saturating_sub(frame), t, &mut grads);
                single[t] = 0.0;
            }
        }
        (loss, grads)
    }

    /// Back-propagates the output errors `seeds[t]` for `t` in `start..=end`,
    /// cutting recurrent paths at `start`.
    fn backward(&self, pass: &ForwardPass, seeds: &[f64], start: usize, end: usize, grads: &mut LstmModel) {
        let n_layers = self.layers.len();
        let mut dh_next: Vec<Array1<f64>> = self.layers.iter().map(|l| Array1::zeros(l.hidden())).collect();
        let mut dc_next = dh_next.clone();
        for s in (start..=end).rev() {
            let mut from_above = &self.w_out * seeds[s];
            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let cache = &pass.steps[s][l];
                let g = &mut grads.layers[l];
                let dh = &from_above + &dh_next[l];
                let dzo = &dh * &cache.tanh_c * &cache.o.mapv(|v| v * (1.0 - v));
                let dc = &dh * &cache.o * &cache.tanh_c.mapv(|v| 1.0 - v * v) + &dzo * &layer.p_o + &dc_next[l];
                let dzf = &dc * &(&cache.c_prev - &cache.g) * &cache.f.mapv(|v| v * (1.0 - v));
                let dzg = &dc * &cache.f.mapv(|v| 1.0 - v) * &cache.g.mapv(|v| 1.0 - v * v);

                outer_add(&mut g.w_f, &dzf, &cache.x);
                outer_add(&mut g.w_g, &dzg, &cache.x);
                outer_add(&mut g.w_o, &dzo, &cache.x);
                outer_add(&mut g.u_f, &dzf, &cache.h_prev);
                outer_add(&mut g.u_g, &dzg, &cache.h_prev);
                outer_add(&mut g.u_o, &dzo, &cache.h_prev);
                g.p_f += &(&dzf * &cache.c_prev);
                g.p_o += &(&dzo * &cache.c);
                g.b_f += &dzf;
                g.b_g += &dzg;
                g.b_o += &dzo;

                dh_next[l] = layer.u_f.t().dot(&dzf) + layer.u_g.t().dot(&dzg) + layer.u_o.t().dot(&dzo);
                dc_next[l] = &dc * &cache.f + &dzf * &layer.p_f;
                from_above = layer.w_f.t().dot(&dzf) + layer.w_g.t().dot(&dzg) + layer.w_o.t().dot(&dzo);
            }
        }
    }

    fn axpy_update(&mut self, velocity: &mut LstmModel, grads: &mut LstmModel, lr: f64, momentum: f64) {
        let mut params = self.tensors_mut();
        let vel = velocity.tensors_mut();
        let grad = grads.tensors_mut();
        for (((_, p), (_, v)), (_, g)) in params.iter_mut().zip(vel).zip(grad) {
            for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                *v = momentum * *v + lr * g;
                *p -= *v;
            }
        }
    }
}

fn outer_add(target: &mut Array2<f64>, column: &Array1<f64>, row: &Array1<f64>) {
    for (i, &a) in column.iter().enumerate() {
        if a != 0.0 {
            target.row_mut(i).scaled_add(a, row);
        }
    }
}

/// Per-sentence gradient descent with momentum over shuffled sentences.
/// Each epoch records the mean per-token loss.
pub fn lstm_train(sequences: &[SequenceSample], config: &LstmConfig) -> Result<(LstmModel, TrainReport)> {
    config.validate()?;
    let mut rng = rng::derive(config.rng_seed, "lstm");
    let mut model = LstmModel::new(config, &mut rng)?;
    for s in sequences {
        model.check_width(s)?;
        if let Some(step) = s.steps.iter().find(|st| st.label > 1) {
            return Err(Error::data(format!("sentence {}: step label {} is not binary", s.sentence_id, step.label)));
        }
    }
    let started = Instant::now();
    let mut velocity = model.zeros_like();
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let n_tokens: usize = sequences.iter().map(SequenceSample::len).sum();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, mut grads) = model.gradients(&sequences[i], config.frame);
            total += loss;
            model.axpy_update(&mut velocity, &mut grads, config.learning_rate, config.momentum);
        }
        let data_loss = total / n_tokens.max(1) as f64;
        if !data_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        records.push(EpochRecord {
            epoch,
            data_loss,
            reg_loss: 0.0,
            wall_ms: epoch_start.elapsed().as_millis() as u64,
        });
    }
    Ok((
        model,
        TrainReport {
            epochs: records,
            wall_ms: started.elapsed().as_millis() as u64,
        },
    ))
}

/// Binary label per token, thresholding the output probability.
pub fn lstm_predict(model: &LstmModel, sequences: &[SequenceSample]) -> Result<Vec<Vec<u8>>> {
    sequences
        .iter()
        .map(|s| {
            model.check_width(s)?;
            Ok(model.predict(s))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::SequenceStep;

    fn sequence(features: &[&[f32]], labels: &[u8]) -> SequenceSample {
        SequenceSample {
            sentence_id: "s".into(),
            steps: features
                .iter()
                .zip(labels)
                .map(|(f, &label)| SequenceStep {
                    token: "t".into(),
                    features: f.to_vec(),
                    label,
                })
                .collect(),
        }
    }

    fn small(hidden: Vec<usize>, seed: u64) -> LstmModel {
        let config = LstmConfig {
            input_dimension: 3,
            hidden_sizes: hidden,
            ..LstmConfig::default()
        };
        LstmModel::new(&config, &mut rng::seeded(seed)).unwrap()
    }

    #[test]
    fn coupled_gates_sum_to_one() {
        let model = small(vec![3, 2], 1);
        let seq = sequence(&[&[0.5, -1.0, 0.2], &[1.0, 0.0, 0.0], &[-0.3, 0.3, 0.9]], &[0, 1, 0]);
        let trace = model.trace(&seq);
        for (f_t, i_t) in trace.forget.iter().zip(&trace.input) {
            for (f, i) in f_t.iter().zip(i_t) {
                assert!((f + i).iter().all(|v| (v - 1.0).abs() < 1e-15));
            }
        }
        assert!(trace.outputs.iter().all(|&y| y > 0.0 && y < 1.0));
    }

    #[test]
    fn hand_set_gates_pass_a_marker_through() {
        let mut model = small(vec![1], 0);
        let layer = &mut model.layers[0];
        *layer = LstmLayer::zeros(3, 1);
        layer.b_f[0] = -20.0; // forget nothing from the past: c = g
        layer.w_g[[0, 0]] = 20.0;
        layer.b_g[0] = -10.0; // g = ±1 for marker 1 / 0
        layer.b_o[0] = 20.0;
        model.w_out[0] = 20.0;
        model.b_out[0] = 0.0;
        let marker = [1u8, 0, 0, 1, 1, 0];
        let feats: Vec<[f32; 3]> = marker.iter().map(|&m| [f32::from(m), 0.3, -0.7]).collect();
        let refs: Vec<&[f32]> = feats.iter().map(|f| f.as_slice()).collect();
        let seq = sequence(&refs, &marker);
        assert_eq!(model.predict(&seq), marker);
        assert!(lstm_predict(&model, &[]).unwrap().is_empty());
    }

    #[test]
    fn truncated_with_long_frame_equals_full_bptt() {
        let model = small(vec![3, 2], 4);
        let seq = sequence(&[&[0.5, -1.0, 0.2], &[1.0, 0.0, 0.0], &[-0.3, 0.3, 0.9], &[0.1, 0.1, 0.1]], &[0, 1, 1, 0]);
        let (l1, mut full) = model.gradients(&seq, 4);
        // route through the per-output windows explicitly
        let pass = model.forward(&seq);
        let mut windowed = model.zeros_like();
        let mut seeds = vec![0.0; 4];
        for t in 0..4 {
            let (_, dz) = model.step_loss(pass.outputs[t], f64::from(seq.steps[t].label));
            windowed.w_out.scaled_add(dz, &pass.top[t]);
            windowed.b_out[0] += dz;
            seeds[t] = dz;
            model.backward(&pass, &seeds, 0, t, &mut windowed);
            seeds[t] = 0.0;
        }
        assert!((l1 - model.sequence_loss(&seq)).abs() < 1e-12);
        for ((name, a), (_, b)) in full.tensors_mut().into_iter().zip(windowed.tensors_mut()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12, "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn overfits_a_small_fixture() {
        let seqs = vec![
            sequence(&[&[0.2, 0.1, 0.0], &[0.9, -0.5, 0.3], &[0.1, 0.1, 0.1]], &[0, 1, 0]),
            sequence(&[&[0.9, -0.5, 0.3], &[0.8, -0.4, 0.2], &[0.0, 0.2, -0.1], &[0.1, 0.0, 0.0]], &[1, 1, 0, 0]),
        ];
        let config = LstmConfig {
            input_dimension: 3,
            hidden_sizes: vec![4],
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 400,
            loss: SequenceLoss::CrossEntropy,
            ..LstmConfig::default()
        };
        let (model, report) = lstm_train(&seqs, &config).unwrap();
        let predicted = lstm_predict(&model, &seqs).unwrap();
        for (p, s) in predicted.iter().zip(&seqs) {
            let gold: Vec<u8> = s.steps.iter().map(|st| st.label).collect();
            assert_eq!(p, &gold);
        }
        assert!(report.epochs.last().unwrap().data_loss < report.epochs[0].data_loss);
    }

    #[test]
    fn config_errors() {
        assert!(LstmConfig { frame: 0, ..LstmConfig::default() }.validate().is_err());
        assert!(LstmConfig { hidden_sizes: vec![], ..LstmConfig::default() }.validate().is_err());
        let seqs = vec![sequence(&[&[0.0, 1.0]], &[0])];
        assert!(matches!(lstm_train(&seqs, &LstmConfig { input_dimension: 3, ..LstmConfig::default() }), Err(Error::Dimension { .. })));
    }
}
