use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::{char_slice, AnnotatedSentence, EntityAnnotation, EntityKind};
use crate::error::{Error, Result};

pub fn parse_xml(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xml_str(&text, &path.display().to_string())
}

/// Parses SemEval DDI markup: every `sentence` element (at any depth) becomes one
/// [`AnnotatedSentence`], every child `entity` one annotation.
pub fn parse_xml_str(text: &str, origin: &str) -> Result<Vec<AnnotatedSentence>> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: e.pos().row as usize,
        message: e.to_string(),
    })?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row as usize;
    let missing = |node: roxmltree::Node, attr: &str| Error::Parse {
        path: origin.to_string(),
        line: line_of(node),
        message: format!("<{}> without `{attr}` attribute", node.tag_name().name()),
    };

    let mut out = Vec::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let id = node.attribute("id").ok_or_else(|| missing(node, "id"))?;
        let text = node.attribute("text").ok_or_else(|| missing(node, "text"))?;
        let mut sentence = AnnotatedSentence {
            id: id.to_string(),
            text: text.to_string(),
            annotations: Vec::new(),
        };
        for entity in node.children().filter(|n| n.has_tag_name("entity")) {
            let offsets = entity
                .attribute("charOffset")
                .ok_or_else(|| missing(entity, "charOffset"))?;
            let kind_attr = entity.attribute("type").ok_or_else(|| missing(entity, "type"))?;
            let kind: EntityKind = kind_attr.parse().map_err(|message| Error::Parse {
                path: origin.to_string(),
                line: line_of(entity),
                message,
            })?;
            let spans = parse_offsets(offsets).ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: line_of(entity),
                message: format!("malformed charOffset `{offsets}`"),
            })?;
            let (start, end) = spans[0];
            let mut ann = sentence.annotate(start, end, kind)?;
            if spans.len() > 1 {
                warn!(
                    "sentence {id}: discontinuous entity `{offsets}`, keeping first span only"
                );
                ann.discontinuous = true;
            } else if let Some(surface) = entity.attribute("text") {
                check_surface(&sentence, &ann, surface)?;
            }
            sentence.annotations.push(ann);
        }
        out.push(sentence);
    }
    Ok(out)
}

fn check_surface(sentence: &AnnotatedSentence, ann: &EntityAnnotation, surface: &str) -> Result<()> {
    if ann.surface.to_lowercase() != surface.to_lowercase() {
        return Err(Error::Annotation {
            sentence_id: sentence.id.clone(),
            message: format!(
                "entity text `{surface}` differs from sentence text `{}` at {}-{}",
                ann.surface, ann.char_start, ann.char_end
            ),
        });
    }
    Ok(())
}

/// `"3-9"` or `"3-9;12-15"`.
fn parse_offsets(raw: &str) -> Option<Vec<(usize, usize)>> {
    raw.split(';')
        .map(|span| {
            let (s, e) = span.trim().split_once('-')?;
            Some((s.trim().parse().ok()?, e.trim().parse().ok()?))
        })
        .collect::<Option<Vec<_>>>()
        .filter(|v| !v.is_empty())
}

fn escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for c in raw.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\t' => out.push_str("&#9;"),
            _ => out.push(c),
        }
    }
    out
}

/// Serializes sentences as a single SemEval-style document.
pub fn write_xml(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<document id=\"corpus\">\n");
    for sentence in sentences {
        let _ = writeln!(
            out,
            "  <sentence id=\"{}\" text=\"{}\">",
            escape(&sentence.id),
            escape(&sentence.text)
        );
        for (i, ann) in sentence.annotations.iter().enumerate() {
            let surface = char_slice(&sentence.text, ann.char_start, ann.char_end)
                .unwrap_or(&ann.surface);
            let _ = writeln!(
                out,
                "    <entity id=\"{}.e{i}\" charOffset=\"{}-{}\" type=\"{}\" text=\"{}\"/>",
                escape(&sentence.id),
                ann.char_start,
                ann.char_end,
                match ann.kind {
                    EntityKind::DrugN => "drug_n",
                    other => other.as_str(),
                },
                escape(surface)
            );
        }
        out.push_str("  </sentence>\n");
    }
    out.push_str("</document>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<document id="DrugDDI.d1">
  <sentence id="d1.s0" text="Modification of surface histidine residues abolishes the cytotoxic activity of Clostridium difficile toxin A">
    <entity id="d1.s0.e0" charOffset="79-107" type="drug_n" text="Clostridium difficile toxin A"/>
  </sentence>
  <sentence id="d1.s1" text="No entities here.">
  </sentence>
</document>
"#;

    #[test]
    fn parses_table_five_sentence() {
        let sentences = parse_xml_str(SAMPLE, "sample.xml").unwrap();
        assert_eq!(sentences.len(), 2);
        let ann = &sentences[0].annotations[0];
        assert_eq!((ann.char_start, ann.char_end), (79, 107));
        assert_eq!(ann.surface.to_lowercase(), "clostridium difficile toxin a");
        assert_eq!(ann.kind, EntityKind::DrugN);
        assert!(sentences[1].annotations.is_empty());
    }

    #[test]
    fn malformed_markup_names_line() {
        let broken = "<document>\n<sentence id=\"a\" text=\"x\">\n</document>\n";
        match parse_xml_str(broken, "bad.xml").unwrap_err() {
            Error::Parse { line, path, .. } => {
                assert_eq!(path, "bad.xml");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_range_offset_names_sentence() {
        let doc = r#"<document><sentence id="s9" text="short">
<entity charOffset="2-40" type="drug" text="x"/></sentence></document>"#;
        match parse_xml_str(doc, "x.xml").unwrap_err() {
            Error::Annotation { sentence_id, .. } => assert_eq!(sentence_id, "s9"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn discontinuous_offsets_keep_first_span() {
        let doc = r#"<document><sentence id="s" text="beta and alpha blockers">
<entity charOffset="0-3;15-22" type="group" text="beta blockers"/></sentence></document>"#;
        let sentences = parse_xml_str(doc, "x.xml").unwrap();
        let ann = &sentences[0].annotations[0];
        assert_eq!(ann.surface, "beta");
        assert!(ann.discontinuous);
    }

    #[test]
    fn writer_round_trips() {
        let sentences = parse_xml_str(SAMPLE, "sample.xml").unwrap();
        let again = parse_xml_str(&write_xml(&sentences), "again.xml").unwrap();
        assert_eq!(sentences, again);
    }
}
