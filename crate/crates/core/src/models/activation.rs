use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Identity,
    /// Row-wise softmax; only meaningful on an output layer.
    Softmax,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl Activation {
    pub fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
            Activation::Softmax => {
                for mut row in z.axis_iter_mut(Axis(0)) {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row /= sum;
                }
            }
        }
    }

    /// Elementwise derivative expressed through the activation output `a`.
    /// Softmax has no elementwise derivative; callers handle its Jacobian.
    pub fn derivative_from_output(self, a: ArrayView2<f64>) -> Array2<f64> {
        match self {
            Activation::Sigmoid => a.mapv(|v| v * (1.0 - v)),
            Activation::Tanh => a.mapv(|v| 1.0 - v * v),
            Activation::Identity => Array2::ones(a.raw_dim()),
            Activation::Softmax => unreachable!("softmax derivative is a Jacobian"),
        }
    }

    /// Back-propagates `grad` (dL/da) through the activation, returning dL/dz.
    pub fn backprop(self, a: ArrayView2<f64>, grad: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Softmax => {
                // J = diag(a) - a aᵀ per row
                let dot = (grad * &a).sum_axis(Axis(1)).insert_axis(Axis(1));
                let mut out = grad - &dot;
                out *= &a;
                out
            }
            other => {
                let mut d = other.derivative_from_output(a);
                Zip::from(&mut d).and(grad).for_each(|d, &g| *d *= g);
                d
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut z = array![[1000.0, 1000.0, 999.0], [-3.0, 0.5, 2.0]];
        Activation::Softmax.apply(&mut z);
        for row in z.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sigmoid_is_stable_and_bounded() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
        assert!((softplus(1.0) - (1.0f64 + 1f64.exp()).ln()).abs() < 1e-15);
        assert_eq!(softplus(100.0), 100.0);
    }

    #[test]
    fn softmax_backprop_matches_explicit_jacobian() {
        let mut a = array![[0.3, -1.2, 0.7]];
        Activation::Softmax.apply(&mut a);
        let g = array![[0.5, -2.0, 1.5]];
        let got = Activation::Softmax.backprop(a.view(), &g);
        for j in 0..3 {
            let expected: f64 = (0..3)
                .map(|i| {
                    let jac = if i == j { a[[0, i]] * (1.0 - a[[0, i]]) } else { -a[[0, i]] * a[[0, j]] };
                    jac * g[[0, i]]
                })
                .sum();
            assert!((got[[0, j]] - expected).abs() < 1e-14);
        }
    }
}
