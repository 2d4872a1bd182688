//! Drug-name extraction from medical text.
//!
//! Sentences are tokenized, embedded with a CBOW model, turned into 5-token
//! tuples or per-token sequences, optionally filtered by token frequency, and
//! classified by one of several neural models. Extracted names are scored as
//! sets against gold annotations.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod models;
pub mod pipeline;
pub mod representation;
pub mod rng;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(data))
}
