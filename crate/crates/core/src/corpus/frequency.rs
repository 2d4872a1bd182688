use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::TokenizedSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub token: String,
    pub count: usize,
    /// 1-based rank by non-increasing count.
    pub rank: usize,
}

/// Unique-token counts ranked by frequency; ties keep first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub entries: Vec<FrequencyEntry>,
    pub total_tokens: usize,
    pub unique_tokens: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FrequencyTable {
    pub fn from_entries(entries: Vec<FrequencyEntry>) -> Self {
        let total_tokens = entries.iter().map(|e| e.count).sum();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.token.clone(), i))
            .collect();
        FrequencyTable {
            unique_tokens: entries.len(),
            entries,
            total_tokens,
            index,
        }
    }

    pub fn get(&self, token: &str) -> Option<&FrequencyEntry> {
        self.index.get(token).map(|&i| &self.entries[i])
    }

    pub fn count(&self, token: &str) -> usize {
        self.get(token).map_or(0, |e| e.count)
    }

    pub fn rank(&self, token: &str) -> Option<usize> {
        self.get(token).map(|e| e.rank)
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.token.clone(), i))
            .collect();
    }

    /// Tab-separated `rank token count` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", e.rank, e.token, e.count);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = || Error::Parse {
                path: "frequency table".into(),
                line: i + 1,
                message: "expected `rank<TAB>token<TAB>count`".into(),
            };
            let mut fields = line.split('\t');
            let rank = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            let token = fields.next().ok_or_else(bad)?.to_string();
            let count = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
            entries.push(FrequencyEntry { token, count, rank });
        }
        Ok(FrequencyTable::from_entries(entries))
    }
}

pub fn build_frequency_table(sentences: &[TokenizedSentence]) -> FrequencyTable {
    // insertion order of the IndexMap is first-occurrence order
    let mut counts: IndexMap<&str, usize> = IndexMap::new();
    for token in sentences.iter().flat_map(|s| s.tokens.iter()) {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let mut ordered: Vec<(&str, usize)> = counts.into_iter().collect();
    // stable sort keeps first-occurrence order among equal counts
    ordered.sort_by_key(|e| std::cmp::Reverse(e.1));
    let entries = ordered
        .into_iter()
        .enumerate()
        .map(|(i, (token, count))| FrequencyEntry {
            token: token.to_string(),
            count,
            rank: i + 1,
        })
        .collect();
    FrequencyTable::from_entries(entries)
}

/// A contiguous run of ranks whose counts are summed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyPartition {
    /// 1-based.
    pub part_index: usize,
    /// Member tokens in rank order.
    pub member_tokens: Vec<String>,
    pub sum_frequency: usize,
    pub first_rank: usize,
    pub last_rank: usize,
}

impl FrequencyPartition {
    pub fn len(&self) -> usize {
        self.member_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_tokens.is_empty()
    }

    pub fn contains(&self, table: &FrequencyTable, token: &str) -> bool {
        table
            .rank(token)
            .is_some_and(|r| (self.first_rank..=self.last_rank).contains(&r))
    }
}

/// Splits ranked tokens into `n_parts` contiguous groups of near-equal summed count.
///
/// A part closes at the first token whose inclusion brings its running sum to at
/// least `total_tokens / n_parts`; the last part takes whatever remains. Every part
/// receives at least one token.
pub fn partition_by_cumulative_frequency(
    table: &FrequencyTable,
    n_parts: usize,
) -> Result<Vec<FrequencyPartition>> {
    if n_parts == 0 {
        return Err(Error::config("n_parts must be at least 1"));
    }
    if n_parts > table.unique_tokens {
        return Err(Error::config(format!(
            "cannot split {} unique tokens into {n_parts} parts",
            table.unique_tokens
        )));
    }
    let target = table.total_tokens as f64 / n_parts as f64;
    let mut parts = Vec::with_capacity(n_parts);
    let mut start = 0usize;
    let n = table.entries.len();
    for part_index in 1..=n_parts {
        let end = if part_index == n_parts {
            n
        } else {
            // leave at least one token for each remaining part
            let max_end = n - (n_parts - part_index);
            let mut running = 0usize;
            let mut end = start;
            while end < max_end {
                running += table.entries[end].count;
                end += 1;
                if running as f64 >= target {
                    break;
                }
            }
            end
        };
        let members = &table.entries[start..end];
        parts.push(FrequencyPartition {
            part_index,
            member_tokens: members.iter().map(|e| e.token.clone()).collect(),
            sum_frequency: members.iter().map(|e| e.count).sum(),
            first_rank: start + 1,
            last_rank: end,
        });
        start = end;
    }
    Ok(parts)
}

/// Rank range `first_rank..=last_rank` (empty when `first_rank > last_rank`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuartileRange {
    pub first_rank: usize,
    pub last_rank: usize,
    pub sum_frequency: usize,
}

/// Four contiguous rank ranges of near-equal unique-token counts; boundary `k`
/// sits at `round(k * unique / 4)`.
pub fn quartile_report(table: &FrequencyTable) -> Vec<QuartileRange> {
    let n = table.unique_tokens;
    let bound = |k: usize| ((k * n) as f64 / 4.0).round() as usize;
    (1..=4)
        .map(|k| {
            let (lo, hi) = (bound(k - 1), bound(k));
            QuartileRange {
                first_rank: lo + 1,
                last_rank: hi,
                sum_frequency: table.entries[lo..hi].iter().map(|e| e.count).sum(),
            }
        })
        .collect()
}

/// Plain-text statistics document: header counts, one record per partition
/// (with the number of distinct drug tokens inside it), then the quartiles.
pub fn stats_report(
    table: &FrequencyTable,
    n_parts: usize,
    drug_tokens: &HashSet<String>,
) -> Result<String> {
    let parts = partition_by_cumulative_frequency(table, n_parts)?;
    let mut out = String::new();
    let _ = writeln!(out, "total_tokens\t{}", table.total_tokens);
    let _ = writeln!(out, "unique_tokens\t{}", table.unique_tokens);
    let _ = writeln!(out, "\n[partitions]");
    let _ = writeln!(out, "part\tsize\tfirst_rank\tlast_rank\tsum_frequency\tdrug_tokens");
    for p in &parts {
        let drugs = p.member_tokens.iter().filter(|t| drug_tokens.contains(*t)).count();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.part_index,
            p.len(),
            p.first_rank,
            p.last_rank,
            p.sum_frequency,
            drugs
        );
    }
    let _ = writeln!(out, "\n[quartiles]");
    let _ = writeln!(out, "quartile\tfirst_rank\tlast_rank\tsum_frequency");
    for (i, q) in quartile_report(table).iter().enumerate() {
        let _ = writeln!(
            out,
            "Q{}\t{}\t{}\t{}",
            i + 1,
            q.first_rank,
            q.last_rank,
            q.sum_frequency
        );
    }
    Ok(out)
}
