//! Word vectors: CBOW training, the token → vector table, and distance statistics.

mod cbow;
mod distance;

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

pub use cbow::{train_cbow, CbowConfig};
pub use distance::{
    cosine, euclidean, group_distance_stats, group_distance_stats_sampled,
    mean_pairwise_euclidean, nearest_neighbors, DistanceStats, GroupPair, PairNormalization,
};

/// Padding token used by per-sentence tuples; always maps to the zero vector.
pub const PAD_TOKEN: &str = "*";

/// Token → fixed-width real vector. Tokens keep insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        EmbeddingTable {
            dimension,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Inserts or replaces a vector.
    pub fn insert(&mut self, token: impl Into<String>, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::Dimension {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        let token = token.into();
        match self.index.get(&token) {
            Some(&i) => {
                self.data[i * self.dimension..(i + 1) * self.dimension].copy_from_slice(vector)
            }
            None => {
                self.index.insert(token.clone(), self.tokens.len());
                self.tokens.push(token);
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    /// Stored vector, if any. The pad token is never stored.
    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dimension..(i + 1) * self.dimension])
    }

    pub fn lookup(&self, token: &str) -> Result<&[f32]> {
        self.get(token).ok_or_else(|| Error::Lookup(token.to_string()))
    }

    /// Total lookup: pad → zeros, known → stored, unknown → deterministic
    /// pseudo-random vector derived from the token string.
    pub fn vector(&self, token: &str) -> Cow<'_, [f32]> {
        if token == PAD_TOKEN {
            return Cow::Owned(vec![0.0; self.dimension]);
        }
        match self.get(token) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(fallback_vector(token, self.dimension)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dimension))
            .map(|(t, v)| (t.as_str(), v))
    }

    /// Largest absolute component over all stored vectors.
    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, x| m.max(x.abs()))
    }

    /// Text layout: `count dimension` header, then `token v1 .. vD` per line.
    /// Values use the shortest representation that round-trips an `f32`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.len(), self.dimension);
        for (token, v) in self.iter() {
            out.push_str(token);
            for x in v {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "embedding table".into(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let (count, dimension) = parse_header(header).ok_or_else(|| {
            parse_err(1, format!("header `{header}` is not `token_count dimension`"))
        })?;
        let mut table = EmbeddingTable::new(dimension);
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default();
            let values: Vec<f32> = fields
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(i + 2, format!("bad value: {e}")))?;
            if values.len() != dimension {
                return Err(parse_err(
                    i + 2,
                    format!("expected {dimension} values, found {}", values.len()),
                ));
            }
            table.insert(token, &values)?;
        }
        if table.len() != count {
            return Err(parse_err(1, format!("header announces {count} tokens, found {}", table.len())));
        }
        Ok(table)
    }

    /// Compact layout: text header, then per token `token<SP>` followed by the
    /// vector as little-endian `f32` and a newline.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dimension)?;
        for (token, v) in self.iter() {
            w.write_all(token.as_bytes())?;
            w.write_all(b" ")?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_binary<R: BufRead>(mut r: R) -> Result<Self> {
        let io = |e| Error::io("embedding table", e);
        let mut header = String::new();
        r.read_line(&mut header).map_err(io)?;
        let (count, dimension) = parse_header(header.trim_end())
            .ok_or_else(|| Error::data(format!("bad binary embedding header `{}`", header.trim_end())))?;
        let mut table = EmbeddingTable::new(dimension);
        let mut buf = vec![0u8; dimension * 4 + 1];
        for _ in 0..count {
            let mut token = Vec::new();
            r.read_until(b' ', &mut token).map_err(io)?;
            if token.pop() != Some(b' ') {
                return Err(Error::data("truncated binary embedding table"));
            }
            r.read_exact(&mut buf).map_err(io)?;
            let values: Vec<f32> = buf[..dimension * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let token = String::from_utf8(token).map_err(|e| Error::data(e.to_string()))?;
            table.insert(token, &values)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let binary = path.extension().is_some_and(|e| e == "bin");
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        if binary {
            self.write_binary(std::io::BufWriter::new(file))
        } else {
            file.write_all(self.to_text().as_bytes())
        }
        .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "bin") {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            EmbeddingTable::read_binary(std::io::BufReader::new(file))
        } else {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            EmbeddingTable::from_text(&text)
        }
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dimension: usize = it.next()?.parse().ok()?;
    (it.next().is_none() && dimension > 0).then_some((count, dimension))
}

/// Deterministic vector for tokens without a trained embedding.
pub fn fallback_vector(token: &str, dimension: usize) -> Vec<f32> {
    let mut rng = rng::derive(0x0dd_5eed, token);
    let scale = 1.0 / dimension as f32;
    (0..dimension)
        .map(|_| (rng.random::<f32>() - 0.5) * scale)
        .collect()
}
