//! Tab-separated tuple and sequence dataset files.
//!
//! Tuple file: one line per tuple, `t1 .. t5 label r1 .. r5D`.
//! Sequence file: `sentence <id> <steps>` header per sentence followed by
//! `token label r1 .. r2D` lines.

use std::fmt::Write as _;

use super::{SequenceSample, SequenceStep, TupleSample, TUPLE_WIDTH};
use crate::error::{Error, Result};

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.into(),
        line,
        message: message.into(),
    }
}

fn push_reals(out: &mut String, values: &[f32]) {
    for v in values {
        write!(out, "\t{v}").unwrap();
    }
}

fn parse_reals<'a>(fields: impl Iterator<Item = &'a str>, origin: &str, line: usize) -> Result<Vec<f32>> {
    fields
        .map(|f| {
            f.parse::<f32>()
                .map_err(|e| parse_err(origin, line, format!("bad real `{f}`: {e}")))
        })
        .collect()
}

pub fn write_tuples(tuples: &[TupleSample]) -> String {
    let mut out = String::new();
    for t in tuples {
        out.push_str(&t.tokens.join("\t"));
        write!(out, "\t{}", t.label).unwrap();
        push_reals(&mut out, &t.vector);
        out.push('\n');
    }
    out
}

pub fn read_tuples(text: &str, origin: &str) -> Result<Vec<TupleSample>> {
    let mut tuples = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < TUPLE_WIDTH + 1 {
            return Err(parse_err(origin, line_no, "expected 5 tokens and a label"));
        }
        let label: u8 = fields[TUPLE_WIDTH]
            .parse()
            .map_err(|_| parse_err(origin, line_no, format!("bad label `{}`", fields[TUPLE_WIDTH])))?;
        if !(1..=super::N_CLASSES as u8).contains(&label) {
            return Err(parse_err(origin, line_no, format!("label {label} outside 1..=6")));
        }
        let vector = parse_reals(fields[TUPLE_WIDTH + 1..].iter().copied(), origin, line_no)?;
        match width {
            None => width = Some(vector.len()),
            Some(w) if w != vector.len() => {
                return Err(parse_err(origin, line_no, format!("expected {w} reals, found {}", vector.len())))
            }
            _ => {}
        }
        tuples.push(TupleSample {
            tokens: fields[..TUPLE_WIDTH].iter().map(|s| s.to_string()).collect(),
            label,
            vector,
        });
    }
    Ok(tuples)
}

pub fn write_sequences(sequences: &[SequenceSample]) -> String {
    let mut out = String::new();
    for s in sequences {
        writeln!(out, "sentence\t{}\t{}", s.sentence_id, s.steps.len()).unwrap();
        for step in &s.steps {
            write!(out, "{}\t{}", step.token, step.label).unwrap();
            push_reals(&mut out, &step.features);
            out.push('\n');
        }
    }
    out
}

pub fn read_sequences(text: &str, origin: &str) -> Result<Vec<SequenceSample>> {
    let mut sequences = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.is_empty());
    while let Some((i, header)) = lines.next() {
        let fields: Vec<&str> = header.split('\t').collect();
        if fields.len() != 3 || fields[0] != "sentence" {
            return Err(parse_err(origin, i + 1, "expected `sentence<TAB>id<TAB>steps` header"));
        }
        let n: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(origin, i + 1, format!("bad step count `{}`", fields[2])))?;
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let (j, line) = lines
                .next()
                .ok_or_else(|| parse_err(origin, i + 1, "sentence truncated"))?;
            let mut parts = line.split('\t');
            let token = parts.next().unwrap_or_default().to_string();
            let label = match parts.next() {
                Some("0") => 0,
                Some("1") => 1,
                other => {
                    return Err(parse_err(origin, j + 1, format!("bad step label {other:?}")));
                }
            };
            steps.push(SequenceStep {
                token,
                label,
                features: parse_reals(parts, origin, j + 1)?,
            });
        }
        sequences.push(SequenceSample {
            sentence_id: fields[1].to_string(),
            steps,
        });
    }
    Ok(sequences)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuples_round_trip() {
        let tuples = vec![TupleSample {
            tokens: ["a", "b,", "c", "*", "*"].map(String::from).to_vec(),
            label: 3,
            vector: vec![0.1, -2.5e-7, 3.0, 0.0, 1.0 / 3.0],
        }];
        let text = write_tuples(&tuples);
        assert_eq!(read_tuples(&text, "mem").unwrap(), tuples);
    }

    #[test]
    fn sequences_round_trip() {
        let seqs = vec![
            SequenceSample {
                sentence_id: "s1".into(),
                steps: vec![
                    SequenceStep { token: "x".into(), features: vec![1.0, 0.0], label: 1 },
                    SequenceStep { token: "y".into(), features: vec![0.5, -0.5], label: 0 },
                ],
            },
            SequenceSample { sentence_id: "empty".into(), steps: vec![] },
        ];
        assert_eq!(read_sequences(&write_sequences(&seqs), "mem").unwrap(), seqs);
    }

    #[test]
    fn bad_label_names_line() {
        let err = read_tuples("a\tb\tc\td\te\t1\t0\na\tb\tc\td\te\t9\t0\n", "f.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
