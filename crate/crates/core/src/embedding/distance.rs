use std::collections::HashSet;

use log::warn;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, PAD_TOKEN};
use crate::error::{Error, Result};
use crate::rng;

fn check_len(u: usize, v: usize) -> Result<()> {
    if u != v {
        return Err(Error::Dimension { expected: u, found: v });
    }
    Ok(())
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

pub fn euclidean<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    check_len(u.len(), v.len())?;
    Ok(u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let d = a.into() - b.into();
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// Scaling applied to the upper-triangle distance sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairNormalization {
    /// `1 / (n (n - 1))`, as the regularizer formula is written.
    #[default]
    Literal,
    /// `2 / (n (n - 1))`: the mean over unordered pairs.
    UnorderedMean,
}

/// Σ_{i<j} ‖x_i − x_j‖ scaled by the chosen normalization.
pub fn mean_pairwise_euclidean<V, T>(vectors: &[V], normalization: PairNormalization) -> Result<f64>
where
    V: AsRef<[T]>,
    T: Copy + Into<f64>,
{
    let n = vectors.len();
    if n < 2 {
        return Err(Error::config(format!(
            "pairwise distance needs at least 2 vectors, got {n}"
        )));
    }
    let mut sum = 0.0;
    for i in 0..n - 1 {
        for j in i + 1..n {
            sum += euclidean(vectors[i].as_ref(), vectors[j].as_ref())?;
        }
    }
    let pairs = (n * (n - 1)) as f64;
    Ok(match normalization {
        PairNormalization::Literal => sum / pairs,
        PairNormalization::UnorderedMean => 2.0 * sum / pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupPair {
    DrugDrug,
    DrugNondrug,
    NondrugNondrug,
}

impl GroupPair {
    pub fn label(self) -> &'static str {
        match self {
            GroupPair::DrugDrug => "drug-drug",
            GroupPair::DrugNondrug => "drug-nondrug",
            GroupPair::NondrugNondrug => "nondrug-nondrug",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub group_pair: GroupPair,
    pub mean_euclidean: f64,
    pub mean_cosine: f64,
    pub pairs: usize,
}

fn mean_stats(
    group_pair: GroupPair,
    pairs: impl Iterator<Item = (usize, usize)>,
    vectors: &[&[f32]],
) -> Result<DistanceStats> {
    let (mut eu, mut co, mut n) = (0.0, 0.0, 0usize);
    for (i, j) in pairs {
        eu += euclidean(vectors[i], vectors[j])?;
        co += cosine(vectors[i], vectors[j])?;
        n += 1;
    }
    Ok(DistanceStats {
        group_pair,
        mean_euclidean: eu / n as f64,
        mean_cosine: co / n as f64,
        pairs: n,
    })
}

fn stats_for_groups(drugs: &[&[f32]], others: &[&[f32]]) -> Result<Vec<DistanceStats>> {
    let mut out = Vec::new();
    let within = |len: usize| (0..len).flat_map(move |i| (i + 1..len).map(move |j| (i, j)));
    if drugs.len() >= 2 {
        out.push(mean_stats(GroupPair::DrugDrug, within(drugs.len()), drugs)?);
    } else {
        warn!("fewer than 2 drug tokens; drug-drug statistics omitted");
    }
    if !drugs.is_empty() && !others.is_empty() {
        let joined: Vec<&[f32]> = drugs.iter().chain(others).copied().collect();
        let d = drugs.len();
        let cross = (0..d).flat_map(|i| (0..others.len()).map(move |j| (i, d + j)));
        out.push(mean_stats(GroupPair::DrugNondrug, cross, &joined)?);
    } else {
        warn!("an empty group; drug-nondrug statistics omitted");
    }
    if others.len() >= 2 {
        out.push(mean_stats(GroupPair::NondrugNondrug, within(others.len()), others)?);
    } else {
        warn!("fewer than 2 non-drug tokens; nondrug-nondrug statistics omitted");
    }
    Ok(out)
}

fn split_groups<'a>(
    table: &'a EmbeddingTable,
    drug_tokens: &HashSet<String>,
) -> Result<(Vec<&'a [f32]>, Vec<&'a [f32]>)> {
    let mut sorted_drugs: Vec<&String> = drug_tokens.iter().collect();
    sorted_drugs.sort();
    let drugs = sorted_drugs
        .into_iter()
        .map(|t| table.lookup(t))
        .collect::<Result<Vec<_>>>()?;
    let others = table
        .iter()
        .filter(|(t, _)| *t != PAD_TOKEN && !drug_tokens.contains(*t))
        .map(|(_, v)| v)
        .collect();
    Ok((drugs, others))
}

/// Mean euclidean distance and cosine similarity within and across the drug and
/// non-drug token groups, over all unordered pairs. Cost is quadratic in the
/// vocabulary; see [`group_distance_stats_sampled`] for large tables.
pub fn group_distance_stats(
    table: &EmbeddingTable,
    drug_tokens: &HashSet<String>,
) -> Result<Vec<DistanceStats>> {
    let (drugs, others) = split_groups(table, drug_tokens)?;
    stats_for_groups(&drugs, &others)
}

/// As [`group_distance_stats`], with each group subsampled to at most
/// `max_per_group` tokens (seeded).
pub fn group_distance_stats_sampled(
    table: &EmbeddingTable,
    drug_tokens: &HashSet<String>,
    max_per_group: usize,
    seed: u64,
) -> Result<Vec<DistanceStats>> {
    let (drugs, others) = split_groups(table, drug_tokens)?;
    let mut rng = rng::derive(seed, "distance.sample");
    fn cap<'a>(rng: &mut rng::Rng, group: Vec<&'a [f32]>, max: usize) -> Vec<&'a [f32]> {
        if group.len() <= max {
            return group;
        }
        let mut picked = sample(rng, group.len(), max).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| group[i]).collect()
    }
    let drugs = cap(&mut rng, drugs, max_per_group);
    let others = cap(&mut rng, others, max_per_group);
    stats_for_groups(&drugs, &others)
}

/// The `k` tokens most cosine-similar to `token` (excluding itself), best first;
/// equal similarities are ordered lexicographically.
pub fn nearest_neighbors(table: &EmbeddingTable, token: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let query = table.lookup(token)?;
    let mut scored = Vec::with_capacity(table.len());
    for (other, v) in table.iter() {
        if other == token {
            continue;
        }
        match cosine(query, v) {
            Ok(sim) => scored.push((other.to_string(), sim)),
            Err(Error::UndefinedSimilarity) => continue,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn cosine_basics() {
        let v = [0.3f64, -1.2, 4.0];
        assert_abs_diff_eq!(cosine(&v, &v).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 32 / (sqrt(14) sqrt(77)) by hand
        assert_abs_diff_eq!(
            cosine(&[1.0f64, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(),
            0.974631846,
            epsilon = 1e-9
        );
        assert!(matches!(cosine(&[0.0f64, 0.0], &[1.0, 2.0]), Err(Error::UndefinedSimilarity)));
        assert!(matches!(cosine(&[1.0f64], &[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn euclidean_basics() {
        let v = [1.5f64, 2.5];
        assert_eq!(euclidean(&v, &v).unwrap(), 0.0);
        assert_eq!(euclidean(&[0.0f64, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(euclidean(&[0.0f64], &[3.0, 4.0]).is_err());
    }

    #[test]
    fn euclidean_matches_naive_loop_on_random_100d_pair() {
        let mut rng = rng::seeded(3);
        let u: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut acc = 0.0;
        let mut i = 0;
        while i < 100 {
            acc += (u[i] - v[i]) * (u[i] - v[i]);
            i += 1;
        }
        assert_abs_diff_eq!(euclidean(&u, &v).unwrap(), acc.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mean_pairwise_hand_cases() {
        let lit = PairNormalization::Literal;
        let two = [vec![0.0f64, 0.0], vec![3.0, 4.0]];
        assert_eq!(mean_pairwise_euclidean(&two, lit).unwrap(), 2.5);
        let line = [vec![0.0f64], vec![1.0], vec![2.0]];
        assert_abs_diff_eq!(mean_pairwise_euclidean(&line, lit).unwrap(), 4.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            mean_pairwise_euclidean(&line, PairNormalization::UnorderedMean).unwrap(),
            4.0 / 3.0,
            epsilon = 1e-15
        );
        let same = vec![vec![0.7f64, -0.1]; 5];
        assert_eq!(mean_pairwise_euclidean(&same, lit).unwrap(), 0.0);
        assert!(mean_pairwise_euclidean(&two[..1], lit).is_err());
    }

    fn toy_table(entries: &[(&str, &[f32])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(entries[0].1.len());
        for (tok, v) in entries {
            t.insert(*tok, v).unwrap();
        }
        t
    }

    #[test]
    fn identical_single_vectors_give_zero_cross_distance() {
        let t = toy_table(&[("aspirin", &[1.0, 2.0]), ("the", &[1.0, 2.0])]);
        let drugs: HashSet<String> = ["aspirin".to_string()].into();
        let stats = group_distance_stats(&t, &drugs).unwrap();
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].group_pair, GroupPair::DrugNondrug);
        assert_eq!(stats[0].mean_euclidean, 0.0);
        assert_abs_diff_eq!(stats[0].mean_cosine, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn five_token_table_matches_pair_enumeration() {
        let entries: [(&str, &[f32]); 5] = [
            ("a", &[1.0, 0.0, 0.5]),
            ("b", &[0.2, 1.0, -0.5]),
            ("c", &[-1.0, 0.3, 0.1]),
            ("d", &[0.4, 0.4, 0.4]),
            ("e", &[2.0, -1.0, 0.0]),
        ];
        let t = toy_table(&entries);
        let drugs: HashSet<String> = ["a".to_string(), "c".to_string()].into();
        let stats = group_distance_stats(&t, &drugs).unwrap();
        let group = |name: &str| drugs.contains(name);
        for s in &stats {
            let (mut eu, mut co, mut n) = (0.0, 0.0, 0);
            for i in 0..5 {
                for j in i + 1..5 {
                    let (gi, gj) = (group(entries[i].0), group(entries[j].0));
                    let pair = match (gi, gj) {
                        (true, true) => GroupPair::DrugDrug,
                        (false, false) => GroupPair::NondrugNondrug,
                        _ => GroupPair::DrugNondrug,
                    };
                    if pair == s.group_pair {
                        eu += euclidean(entries[i].1, entries[j].1).unwrap();
                        co += cosine(entries[i].1, entries[j].1).unwrap();
                        n += 1;
                    }
                }
            }
            assert_eq!(s.pairs, n);
            assert_abs_diff_eq!(s.mean_euclidean, eu / n as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(s.mean_cosine, co / n as f64, epsilon = 1e-12);
        }
        assert_eq!(stats.len(), 3);
    }

    #[test]
    fn unknown_drug_token_is_lookup_error() {
        let t = toy_table(&[("a", &[1.0])]);
        let drugs: HashSet<String> = ["zz".to_string()].into();
        assert!(matches!(group_distance_stats(&t, &drugs), Err(Error::Lookup(_))));
    }

    #[test]
    fn sampled_stats_equal_exact_when_under_cap() {
        let t = toy_table(&[("a", &[1.0, 0.1]), ("b", &[0.0, 1.0]), ("c", &[1.0, 1.0]), ("d", &[0.5, -1.0])]);
        let drugs: HashSet<String> = ["a".to_string(), "b".to_string()].into();
        assert_eq!(
            group_distance_stats(&t, &drugs).unwrap(),
            group_distance_stats_sampled(&t, &drugs, 10, 1).unwrap()
        );
    }

    #[test]
    fn nearest_neighbors_cases() {
        let t = toy_table(&[("w1", &[1.0, 2.0]), ("w2", &[1.0, 2.0]), ("w3", &[-1.0, 0.5])]);
        assert!(nearest_neighbors(&t, "w1", 0).unwrap().is_empty());
        assert_eq!(nearest_neighbors(&t, "w1", 1).unwrap()[0].0, "w2");
        assert!(matches!(nearest_neighbors(&t, "nope", 3), Err(Error::Lookup(_))));
    }

    #[test]
    fn nearest_neighbors_match_exhaustive_scan() {
        let mut rng = rng::seeded(9);
        let mut t = EmbeddingTable::new(4);
        for i in 0..10 {
            let v: Vec<f32> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            t.insert(format!("t{i}"), &v).unwrap();
        }
        let got = nearest_neighbors(&t, "t3", 4).unwrap();
        let q = t.get("t3").unwrap();
        let mut oracle: Vec<(String, f64)> = Vec::new();
        for (tok, v) in t.iter() {
            if tok != "t3" {
                oracle.push((tok.to_string(), cosine(q, v).unwrap()));
            }
        }
        // selection by repeated max
        let mut expected = Vec::new();
        for _ in 0..4 {
            let (idx, _) = oracle
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, (_, s))| if *s > best.1 { (i, *s) } else { best });
            expected.push(oracle.remove(idx).0);
        }
        let got: Vec<String> = got.into_iter().map(|(t, _)| t).collect();
        assert_eq!(got, expected);
    }

    proptest! {
        #[test]
        fn distances_are_symmetric_and_triangle_holds(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            c in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let ab = euclidean(&a, &b).unwrap();
            prop_assert_eq!(ab, euclidean(&b, &a).unwrap());
            prop_assert!(ab >= 0.0);
            let ac = euclidean(&a, &c).unwrap();
            let cb = euclidean(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
            if let (Ok(x), Ok(y)) = (cosine(&a, &b), cosine(&b, &a)) {
                prop_assert_eq!(x, y);
                prop_assert!((-1.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn mean_pairwise_matches_double_loop(
            vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..12)
        ) {
            let n = vs.len();
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i < j {
                        let d: f64 = vs[i].iter().zip(&vs[j]).map(|(x, y)| (x - y).powi(2)).sum();
                        total += d.sqrt();
                    }
                }
            }
            let got = mean_pairwise_euclidean(&vs, PairNormalization::Literal).unwrap();
            prop_assert!((got - total / (n * (n - 1)) as f64).abs() < 1e-12);
        }
    }
}
