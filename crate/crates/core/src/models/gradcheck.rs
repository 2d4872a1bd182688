//! Central finite-difference checks of analytic gradients.

use ndarray::ArrayView2;

use super::lstm::LstmModel;
use super::network::{Network, Objective};
use super::rbm::Rbm;
use crate::error::{Error, Result};
use crate::representation::SequenceSample;

/// Magnitudes below this are compared absolutely rather than relatively.
pub const DEVIATION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_deviation: f64,
    /// `tensor[index]` of the worst element.
    pub worst: String,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, DEVIATION_FLOOR)`.
pub fn relative_deviation(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DEVIATION_FLOOR)
}

/// Compares `analytic` (one flat vector per named tensor, in the order
/// `tensors` yields them) against central differences of `loss`.
pub fn check<M, T, L>(model: &M, tensors: T, loss: L, analytic: &[Vec<f64>], epsilon: f64, tolerance: f64) -> Result<GradCheckReport>
where
    M: Clone,
    T: Fn(&mut M) -> Vec<(String, &mut [f64])>,
    L: Fn(&M) -> f64,
{
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::config(format!("epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    let mut probe = model.clone();
    let shapes: Vec<(String, usize)> = tensors(&mut probe).into_iter().map(|(n, t)| (n, t.len())).collect();
    if shapes.len() != analytic.len() {
        return Err(Error::Dimension {
            expected: shapes.len(),
            found: analytic.len(),
        });
    }
    let mut report = GradCheckReport {
        max_deviation: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (ti, (name, len)) in shapes.iter().enumerate() {
        if analytic[ti].len() != *len {
            return Err(Error::Dimension {
                expected: *len,
                found: analytic[ti].len(),
            });
        }
        for ei in 0..*len {
            let original = tensors(&mut probe)[ti].1[ei];
            tensors(&mut probe)[ti].1[ei] = original + epsilon;
            let plus = loss(&probe);
            tensors(&mut probe)[ti].1[ei] = original - epsilon;
            let minus = loss(&probe);
            tensors(&mut probe)[ti].1[ei] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let dev = relative_deviation(analytic[ti][ei], numeric);
            report.checked += 1;
            if dev > report.max_deviation || report.worst.is_empty() {
                report.max_deviation = dev;
                report.worst = format!("{name}[{ei}]");
            }
        }
    }
    if report.max_deviation > tolerance {
        return Err(Error::GradientMismatch {
            path: report.worst,
            deviation: report.max_deviation,
            tolerance,
        });
    }
    Ok(report)
}

fn network_tensors(net: &mut Network) -> Vec<(String, &mut [f64])> {
    let mut out = Vec::new();
    for (i, layer) in net.layers.iter_mut().enumerate() {
        out.push((format!("layer{i}.weights"), layer.weights.as_slice_mut().expect("standard layout")));
        out.push((format!("layer{i}.bias"), layer.bias.as_slice_mut().expect("standard layout")));
    }
    out
}

/// Checks back-propagation through a feed-forward network, including weight
/// decay and any sparsity penalty in `objective`.
pub fn check_network(
    net: &Network,
    x: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    objective: &Objective,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = net.evaluate(x, targets, objective);
    let analytic: Vec<Vec<f64>> = grads
        .weights
        .iter()
        .zip(&grads.biases)
        .flat_map(|(w, b)| [w.iter().copied().collect(), b.to_vec()])
        .collect();
    check(net, network_tensors, |n| n.loss(x, targets, objective).total(), &analytic, epsilon, tolerance)
}

fn rbm_tensors(rbm: &mut Rbm) -> Vec<(String, &mut [f64])> {
    vec![
        ("weights".into(), rbm.weights.as_slice_mut().unwrap()),
        ("visible_bias".into(), rbm.visible_bias.as_slice_mut().unwrap()),
        ("hidden_bias".into(), rbm.hidden_bias.as_slice_mut().unwrap()),
    ]
}

/// Checks the free-energy gradient that contrastive divergence is built from.
pub fn check_rbm(rbm: &Rbm, v: ArrayView2<f64>, epsilon: f64, tolerance: f64) -> Result<GradCheckReport> {
    let (w, b, c) = rbm.free_energy_gradients(v);
    let analytic = vec![w.iter().copied().collect(), b.to_vec(), c.to_vec()];
    check(rbm, rbm_tensors, |r| r.free_energy(v), &analytic, epsilon, tolerance)
}

/// Checks full back-propagation through time on one sentence.
pub fn check_lstm(model: &LstmModel, sequence: &SequenceSample, epsilon: f64, tolerance: f64) -> Result<GradCheckReport> {
    let (_, mut grads) = model.gradients(sequence, sequence.len().max(1));
    let analytic: Vec<Vec<f64>> = grads.tensors_mut().into_iter().map(|(_, t)| t.to_vec()).collect();
    check(model, LstmModel::tensors_mut, |m| m.sequence_loss(sequence), &analytic, epsilon, tolerance)
}
