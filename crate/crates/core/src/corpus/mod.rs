//! Annotated sentence ingestion, tokenization and token-frequency statistics.
//!
//! Two on-disk layouts are understood: the SemEval DDI XML layout
//! (`document > sentence > entity`) and a line-oriented TSV layout used for
//! hand-built fixtures. Offsets are character offsets with an inclusive end.

mod frequency;
mod tsv;
mod xml;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use frequency::{
    build_frequency_table, partition_by_cumulative_frequency, quartile_report, stats_report,
    FrequencyEntry, FrequencyPartition, FrequencyTable, QuartileRange,
};
pub use tsv::{parse_tsv, parse_tsv_str, write_tsv};
pub use xml::{parse_xml, parse_xml_str, write_xml};

/// Annotation type as found in the SemEval data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Drug,
    DrugN,
    Group,
    Brand,
}

impl EntityKind {
    /// Only `drug` and `drug-n` are extraction targets.
    pub fn is_target(self) -> bool {
        matches!(self, EntityKind::Drug | EntityKind::DrugN)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Drug => "drug",
            EntityKind::DrugN => "drug-n",
            EntityKind::Group => "group",
            EntityKind::Brand => "brand",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "drug" => Ok(EntityKind::Drug),
            "drug-n" | "drug_n" => Ok(EntityKind::DrugN),
            "group" => Ok(EntityKind::Group),
            "brand" => Ok(EntityKind::Brand),
            other => Err(format!("unknown entity type `{other}`")),
        }
    }
}

/// One entity mention. `char_end` is inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    pub kind: EntityKind,
    /// Set when the source offset listed several spans and only the first was kept.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub discontinuous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub text: String,
    pub annotations: Vec<EntityAnnotation>,
}

impl AnnotatedSentence {
    /// Builds an annotation from offsets, checking bounds and deriving the surface.
    pub fn annotate(
        &self,
        char_start: usize,
        char_end: usize,
        kind: EntityKind,
    ) -> Result<EntityAnnotation> {
        let surface = char_slice(&self.text, char_start, char_end).ok_or_else(|| {
            Error::Annotation {
                sentence_id: self.id.clone(),
                message: format!(
                    "offset {char_start}-{char_end} outside sentence of {} characters",
                    self.text.chars().count()
                ),
            }
        })?;
        Ok(EntityAnnotation {
            char_start,
            char_end,
            surface: surface.to_string(),
            kind,
            discontinuous: false,
        })
    }

    /// Checks every annotation against the sentence text.
    pub fn validate(&self) -> Result<()> {
        for ann in &self.annotations {
            let found = char_slice(&self.text, ann.char_start, ann.char_end).ok_or_else(|| {
                Error::Annotation {
                    sentence_id: self.id.clone(),
                    message: format!(
                        "offset {}-{} outside sentence of {} characters",
                        ann.char_start,
                        ann.char_end,
                        self.text.chars().count()
                    ),
                }
            })?;
            if found.to_lowercase() != ann.surface.to_lowercase() {
                return Err(Error::Annotation {
                    sentence_id: self.id.clone(),
                    message: format!(
                        "surface `{}` does not match text `{found}` at {}-{}",
                        ann.surface, ann.char_start, ann.char_end
                    ),
                });
            }
        }
        Ok(())
    }

    /// Target (drug / drug-n) annotations only.
    pub fn targets(&self) -> impl Iterator<Item = &EntityAnnotation> {
        self.annotations.iter().filter(|a| a.kind.is_target())
    }
}

/// Returns the substring covering characters `start..=end`.
pub(crate) fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(Some(text.len()));
    let begin = indices.nth(start)?;
    let stop = indices.nth(end - start)?;
    Some(&text[begin..stop])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Xml,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xml" => Ok(CorpusFormat::Xml),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format `{other}` (expected xml or tsv)")),
        }
    }
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to XML.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => CorpusFormat::Tsv,
            _ => CorpusFormat::Xml,
        }
    }
}

/// Reads a corpus file. A directory is read as every `*.xml` / `*.tsv` file
/// inside it, in file-name order.
pub fn parse_semeval_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<AnnotatedSentence>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                let want = match format {
                    CorpusFormat::Xml => "xml",
                    CorpusFormat::Tsv => "tsv",
                };
                p.extension().and_then(|e| e.to_str()) == Some(want)
            })
            .collect();
        files.sort();
        let mut out = Vec::new();
        for file in files {
            out.extend(parse_semeval_corpus(&file, format)?);
        }
        return Ok(out);
    }
    match format {
        CorpusFormat::Xml => parse_xml(path),
        CorpusFormat::Tsv => parse_tsv(path),
    }
}

/// Lowercased, whitespace-split tokens of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedSentence {
    pub id: String,
    pub tokens: Vec<String>,
}

impl TokenizedSentence {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenizedSentence {
            id: id.into(),
            tokens,
        }
    }

    /// Tokenizes raw text with the same rules as [`tokenize`].
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        TokenizedSentence::new(id, tokenize_text(text))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases and splits on whitespace; attached punctuation is kept.
pub fn tokenize_text(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn tokenize(sentence: &AnnotatedSentence) -> TokenizedSentence {
    TokenizedSentence::from_text(sentence.id.clone(), &sentence.text)
}

pub fn tokenize_all(sentences: &[AnnotatedSentence]) -> Vec<TokenizedSentence> {
    sentences.iter().map(tokenize).collect()
}

/// Reads auxiliary plain text (one sentence per non-empty line).
pub fn read_plain_text(path: &Path) -> Result<Vec<TokenizedSentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| TokenizedSentence::from_text(format!("aux.{i}"), line))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(
            tokenize_text("Clostridium difficile toxin A"),
            vec!["clostridium", "difficile", "toxin", "a"]
        );
        assert!(tokenize_text("").is_empty());
        assert!(tokenize_text("   \t ").is_empty());
    }

    #[test]
    fn tokenize_keeps_attached_punctuation() {
        assert_eq!(
            tokenize_text("alpha-adrenergic stimulants,"),
            vec!["alpha-adrenergic", "stimulants,"]
        );
    }

    #[test]
    fn char_slice_is_inclusive_and_char_based() {
        assert_eq!(char_slice("abcdef", 1, 3), Some("bcd"));
        assert_eq!(char_slice("abc", 2, 2), Some("c"));
        assert_eq!(char_slice("abc", 2, 3), None);
        assert_eq!(char_slice("héllo", 1, 2), Some("él"));
        assert_eq!(char_slice("abc", 2, 1), None);
    }

    #[test]
    fn annotate_derives_surface_for_table_five_sentence() {
        let sentence = AnnotatedSentence {
            id: "s1".into(),
            text: "modification of surface histidine residues abolishes the cytotoxic \
                   activity of clostridium difficile toxin a"
                .into(),
            annotations: vec![],
        };
        let ann = sentence.annotate(79, 107, EntityKind::DrugN).unwrap();
        assert_eq!(ann.surface, "clostridium difficile toxin a");
        let err = sentence.annotate(79, 200, EntityKind::Drug).unwrap_err();
        assert!(err.to_string().contains("s1"));
    }

    #[test]
    fn entity_kind_parses_both_spellings() {
        assert_eq!("drug_n".parse::<EntityKind>().unwrap(), EntityKind::DrugN);
        assert_eq!("drug-n".parse::<EntityKind>().unwrap(), EntityKind::DrugN);
        assert!("enzyme".parse::<EntityKind>().is_err());
        assert!(EntityKind::Drug.is_target());
        assert!(!EntityKind::Brand.is_target());
    }
}
