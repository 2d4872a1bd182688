//! Content-addressed store for stage outputs.

use std::path::{Path, PathBuf};

use log::debug;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArtifactCache {
    dir: PathBuf,
}

impl ArtifactCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ArtifactCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Digest over length-prefixed parts, so `["ab", "c"]` and `["a", "bc"]` differ.
    pub fn key(parts: &[&[u8]]) -> String {
        let mut h = Sha256::new();
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        hex::encode(h.finalize())
    }

    fn path(&self, stage: &str, key: &str) -> PathBuf {
        self.dir.join(format!("{stage}-{key}"))
    }

    pub fn contains(&self, stage: &str, key: &str) -> bool {
        self.path(stage, key).is_file()
    }

    /// Returns the stored bytes for `(stage, key)`, computing and storing them on a miss.
    pub fn fetch(&self, stage: &str, key: &str, compute: impl FnOnce() -> Result<Vec<u8>>) -> Result<Vec<u8>> {
        let path = self.path(stage, key);
        if let Ok(bytes) = std::fs::read(&path) {
            debug!("cache hit {stage} {}", &key[..12]);
            return Ok(bytes);
        }
        let bytes = compute()?;
        // write-then-rename keeps concurrent jobs from reading partial files
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn second_fetch_hits() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ArtifactCache::new(dir.path()).unwrap();
        let calls = Cell::new(0);
        let key = ArtifactCache::key(&[b"x"]);
        for _ in 0..2 {
            let out = cache
                .fetch("stage", &key, || {
                    calls.set(calls.get() + 1);
                    Ok(b"payload".to_vec())
                })
                .unwrap();
            assert_eq!(out, b"payload");
        }
        assert_eq!(calls.get(), 1);
        assert!(cache.contains("stage", &key));
    }

    #[test]
    fn keys_are_length_prefixed() {
        assert_ne!(ArtifactCache::key(&[b"ab", b"c"]), ArtifactCache::key(&[b"a", b"bc"]));
    }
}
