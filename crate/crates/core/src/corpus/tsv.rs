//! Fixture layout: `id <TAB> text <TAB> annotations`, where annotations are
//! `start-end:kind` items joined by `;` (the third field may be empty or absent).
//! Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use super::{AnnotatedSentence, EntityKind};
use crate::error::{Error, Result};

pub fn parse_tsv(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tsv_str(&text, &path.display().to_string())
}

pub fn parse_tsv_str(text: &str, origin: &str) -> Result<Vec<AnnotatedSentence>> {
    let mut out = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let text = fields
            .next()
            .ok_or_else(|| parse_err("expected at least two tab-separated fields".into()))?;
        let raw_annotations = fields.next().unwrap_or("");
        if fields.next().is_some() {
            return Err(parse_err("more than three tab-separated fields".into()));
        }
        let mut sentence = AnnotatedSentence {
            id: id.to_string(),
            text: text.to_string(),
            annotations: Vec::new(),
        };
        for item in raw_annotations.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (span, kind) = item
                .split_once(':')
                .ok_or_else(|| parse_err(format!("annotation `{item}` is not `start-end:kind`")))?;
            let (start, end) = span
                .split_once('-')
                .and_then(|(s, e)| Some((s.parse::<usize>().ok()?, e.parse::<usize>().ok()?)))
                .ok_or_else(|| parse_err(format!("malformed span `{span}`")))?;
            let kind: EntityKind = kind.parse().map_err(parse_err)?;
            let ann = sentence.annotate(start, end, kind)?;
            sentence.annotations.push(ann);
        }
        out.push(sentence);
    }
    Ok(out)
}

pub fn write_tsv(sentences: &[AnnotatedSentence]) -> Result<String> {
    let mut out = String::new();
    for sentence in sentences {
        if sentence.id.contains(['\t', '\n']) || sentence.text.contains(['\t', '\n', '\r']) {
            return Err(Error::data(format!(
                "sentence {} contains a tab or newline and cannot be written as TSV",
                sentence.id
            )));
        }
        let annotations: Vec<String> = sentence
            .annotations
            .iter()
            .map(|a| format!("{}-{}:{}", a.char_start, a.char_end, a.kind))
            .collect();
        let _ = writeln!(out, "{}\t{}\t{}", sentence.id, sentence.text, annotations.join(";"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Offsets counted by hand:
    //  s1: "aspirin" = chars 0..=6; "warfarin sodium" = 23..=37
    //  s2: no annotations
    //  s3: "ddavp" = 4..=8 (brand)
    const FIXTURE: &str = "\
s1\tAspirin may potentiate warfarin sodium effects\t0-6:drug;23-37:drug
s2\tPatients were monitored closely.\t
s3\tUse DDAVP with care\t4-8:brand
";

    #[test]
    fn parses_three_sentence_fixture_field_by_field() {
        let s = parse_tsv_str(FIXTURE, "fixture.tsv").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].id, "s1");
        assert_eq!(s[0].annotations.len(), 2);
        assert_eq!(s[0].annotations[0].surface, "Aspirin");
        assert_eq!(s[0].annotations[0].kind, EntityKind::Drug);
        assert_eq!(s[0].annotations[1].surface, "warfarin sodium");
        assert_eq!((s[0].annotations[1].char_start, s[0].annotations[1].char_end), (23, 37));
        assert_eq!(s[1].text, "Patients were monitored closely.");
        assert!(s[1].annotations.is_empty());
        assert_eq!(s[2].annotations[0].surface, "DDAVP");
        assert_eq!(s[2].annotations[0].kind, EntityKind::Brand);
    }

    #[test]
    fn round_trips_through_writer() {
        let s = parse_tsv_str(FIXTURE, "fixture.tsv").unwrap();
        let again = parse_tsv_str(&write_tsv(&s).unwrap(), "again.tsv").unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn bad_span_reports_line() {
        let err = parse_tsv_str("# header\ns1\ttext\tx-3:drug\n", "f.tsv").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offset_outside_text_is_annotation_error() {
        let err = parse_tsv_str("s7\tabc\t1-9:drug\n", "f.tsv").unwrap_err();
        assert!(matches!(err, Error::Annotation { ref sentence_id, .. } if sentence_id == "s7"));
    }

    #[test]
    fn empty_input_gives_no_sentences() {
        assert!(parse_tsv_str("", "f.tsv").unwrap().is_empty());
    }
}
