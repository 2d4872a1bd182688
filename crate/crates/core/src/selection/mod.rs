//! Test-time candidate selection: drop tuples whose leading token is frequent
//! in the training corpus, since drug names are rare.

mod kmeans;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{partition_by_cumulative_frequency, FrequencyTable};
use crate::error::{Error, Result};
use crate::representation::TupleSample;

pub use kmeans::{kmeans, ClusterModel};

/// Lloyd iteration cap used by [`select_by_clustering`].
pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionStrategy {
    #[default]
    All,
    LowerTwoThirds,
    /// Keep `x` of `y` k-means clusters.
    Cluster { x: usize, y: usize },
}

impl SelectionStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionStrategy::Cluster { x, y } if x == 0 || x >= y => Err(Error::config(format!(
                "cluster selection needs 1 <= x < y, got x={x}, y={y}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionStrategy::All => f.write_str("all"),
            SelectionStrategy::LowerTwoThirds => f.write_str("lower_two_thirds"),
            SelectionStrategy::Cluster { x, y } => write!(f, "cluster:{x}/{y}"),
        }
    }
}

/// Accepts `all`, `lower_two_thirds` and `cluster:X/Y`.
impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let strategy = match s {
            "all" => SelectionStrategy::All,
            "lower_two_thirds" => SelectionStrategy::LowerTwoThirds,
            _ => {
                let spec = s
                    .strip_prefix("cluster:")
                    .ok_or_else(|| Error::config(format!("unknown selection strategy `{s}`")))?;
                let (x, y) = spec
                    .split_once('/')
                    .ok_or_else(|| Error::config(format!("expected cluster:X/Y, got `{s}`")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::config(format!("bad cluster count `{v}`")))
                };
                SelectionStrategy::Cluster { x: parse(x)?, y: parse(y)? }
            }
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

pub fn select_all(tuples: &[TupleSample]) -> Vec<TupleSample> {
    tuples.to_vec()
}

/// Keeps tuples whose first token falls in part 2 or 3 of a three-way
/// cumulative-frequency partition of `table`; unseen tokens count as part 3.
pub fn select_lower_two_thirds(tuples: &[TupleSample], table: &FrequencyTable) -> Result<Vec<TupleSample>> {
    let parts = partition_by_cumulative_frequency(table, 3)?;
    let frequent_last_rank = parts[0].last_rank;
    Ok(tuples
        .iter()
        .filter(|t| table.rank(&t.tokens[0]).is_none_or(|r| r > frequent_last_rank))
        .cloned()
        .collect())
}

/// Clusters tuple vectors into `y` groups, orders the groups by the mean
/// training count of their members' first token (ascending; ties by cluster
/// id), and keeps the members of the first `x`.
pub fn select_by_clustering(
    tuples: &[TupleSample],
    strategy: SelectionStrategy,
    table: &FrequencyTable,
    seed: u64,
) -> Result<Vec<TupleSample>> {
    let SelectionStrategy::Cluster { x, y } = strategy else {
        return Err(Error::config(format!("select_by_clustering needs a cluster strategy, got {strategy}")));
    };
    strategy.validate()?;
    if tuples.is_empty() {
        return Ok(Vec::new());
    }
    let vectors: Vec<&[f32]> = tuples.iter().map(|t| t.vector.as_slice()).collect();
    let model = kmeans(&vectors, y, seed, KMEANS_MAX_ITER)?;
    let keep = rarest_clusters(tuples, &model, table, x);
    Ok(tuples
        .iter()
        .zip(&model.assignment)
        .filter(|(_, a)| keep[**a])
        .map(|(t, _)| t.clone())
        .collect())
}

fn rarest_clusters(tuples: &[TupleSample], model: &ClusterModel, table: &FrequencyTable, x: usize) -> Vec<bool> {
    let mut sums = vec![0.0f64; model.k];
    let mut counts = vec![0usize; model.k];
    for (t, &a) in tuples.iter().zip(&model.assignment) {
        sums[a] += table.count(&t.tokens[0]) as f64;
        counts[a] += 1;
    }
    let mut order: Vec<(usize, f64)> = (0..model.k)
        .map(|c| {
            let mean = if counts[c] == 0 { f64::INFINITY } else { sums[c] / counts[c] as f64 };
            (c, mean)
        })
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut keep = vec![false; model.k];
    for &(c, _) in order.iter().take(x) {
        keep[c] = true;
    }
    keep
}

/// Counts before and after a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub strategy: SelectionStrategy,
    pub seed: u64,
    pub tuples_before: usize,
    pub tuples_after: usize,
    pub drug_tuples_before: usize,
    pub drug_tuples_after: usize,
}

pub fn apply_selection(
    tuples: &[TupleSample],
    strategy: SelectionStrategy,
    table: &FrequencyTable,
    seed: u64,
) -> Result<(Vec<TupleSample>, SelectionManifest)> {
    strategy.validate()?;
    let selected = match strategy {
        SelectionStrategy::All => select_all(tuples),
        SelectionStrategy::LowerTwoThirds => select_lower_two_thirds(tuples, table)?,
        SelectionStrategy::Cluster { .. } => select_by_clustering(tuples, strategy, table, seed)?,
    };
    let drugs = |ts: &[TupleSample]| ts.iter().filter(|t| t.label > 1).count();
    let manifest = SelectionManifest {
        strategy,
        seed,
        tuples_before: tuples.len(),
        tuples_after: selected.len(),
        drug_tuples_before: drugs(tuples),
        drug_tuples_after: drugs(&selected),
    };
    Ok((selected, manifest))
}
