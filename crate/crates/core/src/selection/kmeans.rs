use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster id per input vector.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroid after each assignment pass.
    pub distortion_history: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn distortion(&self) -> f64 {
        self.distortion_history.last().copied().unwrap_or(0.0)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

fn squared_distance(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, c)| {
            let d = f64::from(*x) - c;
            d * d
        })
        .sum()
}

fn nearest(point: &[f32], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init<V: AsRef<[f32]>>(vectors: &[V], k: usize, rng: &mut rng::Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let as_f64 = |i: usize| vectors[i].as_ref().iter().map(|&x| f64::from(x)).collect::<Vec<f64>>();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![as_f64(first)];
    let mut d2: Vec<f64> = vectors
        .iter()
        .map(|v| squared_distance(v.as_ref(), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every point coincides with a centroid: pick uniformly among the rest
            let remaining: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        chosen[pick] = true;
        let c = as_f64(pick);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(v.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from a seeded k-means++ start.
///
/// Stops when an assignment pass changes nothing or after `max_iter` passes.
/// A cluster that loses all its members keeps its previous centroid.
pub fn kmeans<V: AsRef<[f32]>>(vectors: &[V], k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel> {
    let n = vectors.len();
    if k == 0 {
        return Err(Error::config("k-means needs at least one cluster"));
    }
    if k > n {
        return Err(Error::config(format!("cannot form {k} clusters from {n} vectors")));
    }
    let dim = vectors[0].as_ref().len();
    if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: v.as_ref().len(),
        });
    }
    let mut rng = rng::derive(seed, "kmeans");
    let mut centroids = plus_plus_init(vectors, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut distortion = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let (j, d) = nearest(v.as_ref(), &centroids);
            distortion += d;
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        history.push(distortion);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &a) in vectors.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, &x) in sums[a].iter_mut().zip(v.as_ref()) {
                *s += f64::from(x);
            }
        }
        for ((c, s), &m) in centroids.iter_mut().zip(sums).zip(&counts) {
            if m > 0 {
                *c = s.into_iter().map(|x| x / m as f64).collect();
            }
        }
    }
    Ok(ClusterModel {
        k,
        centroids,
        assignment,
        distortion_history: history,
        iterations,
    })
}
