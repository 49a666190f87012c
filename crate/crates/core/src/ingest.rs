//! Readers for source NLU datasets.
//!
//! Two on-disk layouts are supported:
//!
//! * a BIO token file, one blank-line-delimited block per utterance:
//!
//!   ```text
//!   #id r1
//!   #intent inform
//!   show	O
//!   cheap	B-price
//!   ```
//!
//! * a JSON list of char-span documents,
//!   `{"id", "text", "requested_slots", "labels": [{"slot", "start", "end"}]}`.
//!
//! Records read from span documents keep their `requested_slots`, which
//! [`assemble_context`] can turn into a short system-side frame in front of
//! the utterance.
#![allow(clippy::tabs_in_doc_comments)]

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::questions::Template;
use crate::schema::{char_len, label_is_valid, NluRecord, SlotSpan};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Bio { line: usize, message: String },
    #[error("record '{record}': {message}")]
    Span { record: String, message: String },
    #[error("malformed span document: {0}")]
    SpanFormat(#[source] serde_json::Error),
    #[error("invalid frame template: {0}")]
    Frame(String),
}

/// A BIO label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(String),
    Inside(String),
}

impl Tag {
    pub fn parse(s: &str) -> Option<Tag> {
        if s == "O" {
            return Some(Tag::Outside);
        }
        let (prefix, label) = s.split_once('-')?;
        if !label_is_valid(label) {
            return None;
        }
        match prefix {
            "B" => Some(Tag::Begin(label.to_string())),
            "I" => Some(Tag::Inside(label.to_string())),
            _ => None,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Outside => f.write_str("O"),
            Tag::Begin(l) => write!(f, "B-{l}"),
            Tag::Inside(l) => write!(f, "I-{l}"),
        }
    }
}

/// One tokenized, BIO-tagged utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub intents: Vec<String>,
}

/// Rewrites every `I-x` not preceded by `B-x`/`I-x` as `B-x`. Returns the number of repairs.
pub fn repair_tags(tags: &mut [Tag]) -> usize {
    let mut repaired = 0;
    let mut open: Option<String> = None;
    for tag in tags.iter_mut() {
        match tag {
            Tag::Outside => open = None,
            Tag::Begin(l) => open = Some(l.clone()),
            Tag::Inside(l) => {
                if open.as_deref() != Some(l.as_str()) {
                    *tag = Tag::Begin(l.clone());
                    repaired += 1;
                }
                open = tag.label().map(str::to_string);
            }
        }
    }
    repaired
}

fn bio_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Bio {
        line,
        message: message.into(),
    }
}

/// Parses a BIO token file. Orphan `I-x` tags are repaired to `B-x` with a warning.
pub fn parse_bio(text: &str) -> Result<Vec<BioSentence>, IngestError> {
    let mut sentences = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(parse_bio_block(&block)?);
                block.clear();
            }
        } else {
            block.push((idx + 1, line));
        }
    }
    if !block.is_empty() {
        sentences.push(parse_bio_block(&block)?);
    }
    Ok(sentences)
}

fn header<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(key)?;
    if rest.is_empty() {
        Some("")
    } else {
        rest.strip_prefix(' ').map(str::trim)
    }
}

fn parse_bio_block(block: &[(usize, &str)]) -> Result<BioSentence, IngestError> {
    let (id_line, first) = block[0];
    let id = header(first, "#id")
        .filter(|id| !id.is_empty())
        .ok_or_else(|| bio_err(id_line, "expected '#id <record_id>' header"))?
        .to_string();
    let (intent_line, second) = block
        .get(1)
        .copied()
        .ok_or_else(|| bio_err(id_line, "missing '#intent' header"))?;
    let intent_list = header(second, "#intent")
        .ok_or_else(|| bio_err(intent_line, "missing '#intent' header"))?;
    let mut intents = Vec::new();
    for label in intent_list.split(',').map(str::trim).filter(|l| !l.is_empty()) {
        if !label_is_valid(label) {
            return Err(bio_err(intent_line, format!("invalid intent label '{label}'")));
        }
        intents.push(label.to_string());
    }

    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for &(line_no, line) in &block[2..] {
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 2 {
            return Err(bio_err(
                line_no,
                format!("expected 2 tab-separated columns, found {}", columns.len()),
            ));
        }
        if columns[0].is_empty() {
            return Err(bio_err(line_no, "empty token"));
        }
        let tag = Tag::parse(columns[1])
            .ok_or_else(|| bio_err(line_no, format!("invalid tag '{}'", columns[1])))?;
        tokens.push(columns[0].to_string());
        tags.push(tag);
    }
    if tokens.is_empty() {
        return Err(bio_err(id_line, format!("record '{id}' has no tokens")));
    }
    let repaired = repair_tags(&mut tags);
    if repaired > 0 {
        log::warn!("record '{id}': repaired {repaired} orphan I- tag(s) to B-");
    }
    Ok(BioSentence {
        id,
        tokens,
        tags,
        intents,
    })
}

/// Inverse of [`parse_bio`] for valid sentences.
pub fn render_bio(sentences: &[BioSentence]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("#id ");
        out.push_str(&s.id);
        out.push('\n');
        out.push_str("#intent");
        if !s.intents.is_empty() {
            out.push(' ');
            out.push_str(&s.intents.join(","));
        }
        out.push('\n');
        for (token, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(token);
            out.push('\t');
            out.push_str(&tag.to_string());
            out.push('\n');
        }
    }
    out
}

/// Joins tokens with single spaces and turns each maximal B/I run into a span.
pub fn bio_to_spans(sentence: &BioSentence) -> NluRecord {
    let mut starts = Vec::with_capacity(sentence.tokens.len());
    let mut cursor = 0;
    for token in &sentence.tokens {
        starts.push(cursor);
        cursor += char_len(token) + 1;
    }
    let context = sentence.tokens.join(" ");

    let mut record = NluRecord::new(sentence.id.clone(), context);
    record.intents = sentence.intents.iter().cloned().collect();

    // (label, start char, index of last token)
    let mut open: Option<(String, usize, usize)> = None;
    let close = |open: &mut Option<(String, usize, usize)>, record: &mut NluRecord| {
        if let Some((label, start, last)) = open.take() {
            let end = starts[last] + char_len(&sentence.tokens[last]);
            let span = SlotSpan::from_context(label, &record.context, start, end)
                .expect("token offsets lie inside the joined context");
            record.slots.push(span);
        }
    };
    for (i, tag) in sentence.tags.iter().enumerate() {
        match tag {
            Tag::Outside => close(&mut open, &mut record),
            Tag::Begin(label) => {
                close(&mut open, &mut record);
                open = Some((label.clone(), starts[i], i));
            }
            Tag::Inside(label) => match &mut open {
                Some((open_label, _, last)) if open_label == label => *last = i,
                _ => {
                    close(&mut open, &mut record);
                    open = Some((label.clone(), starts[i], i));
                }
            },
        }
    }
    close(&mut open, &mut record);
    record
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanLabel {
    pub slot: String,
    pub start: usize,
    pub end: usize,
    /// Optional copy of the labelled text, checked against `text` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

/// One record of the span-annotated JSON layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanDoc {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub requested_slots: Vec<String>,
    #[serde(default)]
    pub labels: Vec<SpanLabel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intents: Vec<String>,
}

pub fn read_span_docs(text: &str) -> Result<Vec<SpanDoc>, IngestError> {
    serde_json::from_str(text).map_err(IngestError::SpanFormat)
}

pub fn render_span_docs(docs: &[SpanDoc]) -> String {
    let mut out = serde_json::to_string_pretty(docs).expect("span docs serialize");
    out.push('\n');
    out
}

/// Converts one span document into a record with `context == text`.
pub fn span_doc_to_record(doc: &SpanDoc) -> Result<NluRecord, IngestError> {
    let err = |message: String| IngestError::Span {
        record: doc.id.clone(),
        message,
    };
    if doc.id.is_empty() {
        return Err(err("empty record id".into()));
    }
    let len = char_len(&doc.text);
    let mut record = NluRecord::new(doc.id.clone(), doc.text.clone());
    for label in &doc.labels {
        if !label_is_valid(&label.slot) {
            return Err(err(format!("invalid slot name '{}'", label.slot)));
        }
        if label.start >= label.end || label.end > len {
            return Err(err(format!(
                "span [{},{}) of slot '{}' out of bounds for text of length {len}",
                label.start, label.end, label.slot
            )));
        }
        let span = SlotSpan::from_context(label.slot.clone(), &doc.text, label.start, label.end)
            .expect("bounds checked");
        if let Some(expected) = &label.value {
            if *expected != span.value {
                return Err(err(format!(
                    "span text mismatch for slot '{}': labelled '{}', text has '{}'",
                    label.slot, expected, span.value
                )));
            }
        }
        record.slots.push(span);
    }
    for intent in &doc.intents {
        if !label_is_valid(intent) {
            return Err(err(format!("invalid intent label '{intent}'")));
        }
        record.intents.insert(intent.clone());
    }
    record.requested_slots = doc.requested_slots.clone();
    Ok(record)
}

/// Parses the span-annotated JSON layout into records.
pub fn parse_span_docs(text: &str) -> Result<Vec<NluRecord>, IngestError> {
    let docs = read_span_docs(text)?;
    let mut seen = HashSet::new();
    docs.iter()
        .map(|doc| {
            if !seen.insert(doc.id.as_str()) {
                return Err(IngestError::Span {
                    record: doc.id.clone(),
                    message: "duplicate record id".into(),
                });
            }
            span_doc_to_record(doc)
        })
        .collect()
}

/// How to build a system-side frame in front of an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOptions {
    pub include_prev_turn: bool,
    pub frame_template: Template,
    pub separator: String,
}

impl FrameOptions {
    pub const DEFAULT_TEMPLATE: &'static str = "the system asked about {}.";
    /// Joins requested slot names inside the frame.
    pub const SLOT_JOINER: &'static str = " and ";

    pub fn new(
        include_prev_turn: bool,
        frame_template: &str,
        separator: impl Into<String>,
    ) -> Result<Self, IngestError> {
        let frame_template =
            Template::parse(frame_template).map_err(|e| IngestError::Frame(e.to_string()))?;
        Ok(FrameOptions {
            include_prev_turn,
            frame_template,
            separator: separator.into(),
        })
    }
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions::new(true, Self::DEFAULT_TEMPLATE, " ").expect("default template is valid")
    }
}

/// Rebuilds `record.context` as `frame + separator + utterance`, shifting spans.
///
/// With `include_prev_turn == false` or no requested slots the context is the
/// bare utterance.
pub fn assemble_context(
    record: &NluRecord,
    requested_slots: &[String],
    opts: &FrameOptions,
) -> NluRecord {
    let prefix = if opts.include_prev_turn && !requested_slots.is_empty() {
        let names = requested_slots.join(FrameOptions::SLOT_JOINER);
        format!("{}{}", opts.frame_template.fill(&names), opts.separator)
    } else {
        String::new()
    };
    let shift = char_len(&prefix);
    let mut out = record.clone();
    out.context = format!("{prefix}{}", record.utterance);
    out.context_offset = shift;
    out.slots = record
        .slots
        .iter()
        .map(|s| SlotSpan {
            start: s.start - record.context_offset + shift,
            end: s.end - record.context_offset + shift,
            ..s.clone()
        })
        .collect();
    out
}

/// Distinct slot names over a dataset, sorted.
pub fn slot_schema(records: &[NluRecord]) -> Vec<String> {
    let names: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.slots.iter().map(|s| s.slot_name.as_str()))
        .collect();
    names.into_iter().map(str::to_string).collect()
}

/// Distinct intent labels over a dataset, sorted.
pub fn intent_inventory(records: &[NluRecord]) -> Vec<String> {
    let labels: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.intents.iter().map(String::as_str))
        .collect();
    labels.into_iter().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{char_find, validate_record};

    const TOY: &str = "#id r1\n#intent inform\nshow\tO\ncheap\tB-price\nitalian\tB-cuisine\nrestaurants\tO\n";

    #[test]
    fn parses_single_block() {
        let sentences = parse_bio(TOY).unwrap();
        assert_eq!(sentences.len(), 1);
        let s = &sentences[0];
        assert_eq!(s.id, "r1");
        assert_eq!(s.tokens, ["show", "cheap", "italian", "restaurants"]);
        assert_eq!(
            s.tags,
            [
                Tag::Outside,
                Tag::Begin("price".into()),
                Tag::Begin("cuisine".into()),
                Tag::Outside
            ]
        );
        assert_eq!(s.intents, ["inform"]);
    }

    #[test]
    fn empty_stream() {
        assert!(parse_bio("").unwrap().is_empty());
        assert!(parse_bio("\n\n").unwrap().is_empty());
    }

    #[test]
    fn three_columns_is_an_error_at_that_line() {
        let text = "#id r1\n#intent a\nshow\tO\ncheap\tB-price\textra\n";
        match parse_bio(text) {
            Err(IngestError::Bio { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_and_tag_errors() {
        assert!(matches!(
            parse_bio("#id r1\nshow\tO\n"),
            Err(IngestError::Bio { line: 2, .. })
        ));
        assert!(matches!(
            parse_bio("show\tO\n"),
            Err(IngestError::Bio { line: 1, .. })
        ));
        assert!(matches!(
            parse_bio("#id r1\n#intent\nshow\tX-y\n"),
            Err(IngestError::Bio { line: 3, .. })
        ));
    }

    #[test]
    fn zero_intents_and_multi_intent() {
        let text = "#id a\n#intent\nhi\tO\n\n#id b\n#intent x, y\nhi\tO\n";
        let s = parse_bio(text).unwrap();
        assert!(s[0].intents.is_empty());
        assert_eq!(s[1].intents, ["x", "y"]);
    }

    #[test]
    fn spans_from_bio() {
        let record = bio_to_spans(&parse_bio(TOY).unwrap()[0]);
        assert_eq!(record.context, "show cheap italian restaurants");
        let joined = "show cheap italian restaurants";
        let price = &record.slots[0];
        assert_eq!((price.slot_name.as_str(), price.start, price.end), ("price", 5, 10));
        assert_eq!(char_find(joined, "cheap"), Some(5));
        let cuisine = &record.slots[1];
        assert_eq!((cuisine.start, cuisine.end), (11, 18));
        assert_eq!(cuisine.value, "italian");
        assert!(validate_record(&record).is_empty());
    }

    #[test]
    fn run_merging() {
        let s = BioSentence {
            id: "r".into(),
            tokens: vec!["new".into(), "york".into()],
            tags: vec![Tag::Begin("x".into()), Tag::Inside("x".into())],
            intents: vec![],
        };
        let record = bio_to_spans(&s);
        assert_eq!(record.slots.len(), 1);
        assert_eq!(record.slots[0].value, "new york");
        assert_eq!((record.slots[0].start, record.slots[0].end), (0, 8));
    }

    #[test]
    fn all_outside_gives_no_spans() {
        let s = parse_bio("#id r\n#intent\nhello\tO\nthere\tO\n").unwrap();
        assert!(bio_to_spans(&s[0]).slots.is_empty());
    }

    #[test]
    fn orphan_inside_is_repaired() {
        let s = parse_bio("#id r\n#intent\nto\tO\nnew\tI-city\nyork\tI-city\n").unwrap();
        assert_eq!(s[0].tags[1], Tag::Begin("city".into()));
        assert_eq!(s[0].tags[2], Tag::Inside("city".into()));
        let record = bio_to_spans(&s[0]);
        assert_eq!(record.slots.len(), 1);
        assert_eq!(record.slots[0].value, "new york");
    }

    #[test]
    fn adjacent_begins_are_separate_spans() {
        let mut tags = vec![
            Tag::Begin("a".into()),
            Tag::Begin("a".into()),
            Tag::Inside("b".into()),
        ];
        assert_eq!(repair_tags(&mut tags), 1);
        let s = BioSentence {
            id: "r".into(),
            tokens: vec!["x".into(), "y".into(), "z".into()],
            tags,
            intents: vec![],
        };
        let values: Vec<_> = bio_to_spans(&s).slots.into_iter().map(|s| s.value).collect();
        assert_eq!(values, ["x", "y", "z"]);
    }

    #[test]
    fn span_doc_parsing() {
        let json = r#"[{"id": "d1", "text": "for four people", "requested_slots": ["people"],
                        "labels": [{"slot": "people", "start": 4, "end": 8}]},
                       {"id": "d2", "text": "hello", "labels": []}]"#;
        let records = parse_span_docs(json).unwrap();
        assert_eq!(records[0].slots[0].value, "four");
        assert_eq!(char_find("for four people", "four"), Some(4));
        assert_eq!(records[0].requested_slots, ["people"]);
        assert!(records[1].slots.is_empty());
    }

    #[test]
    fn span_doc_errors() {
        let oob = r#"[{"id": "d1", "text": "for four people", "labels": [{"slot": "people", "start": 4, "end": 30}]}]"#;
        assert!(matches!(parse_span_docs(oob), Err(IngestError::Span { record, .. }) if record == "d1"));
        let mismatch = r#"[{"id": "d1", "text": "for four people", "labels": [{"slot": "people", "start": 4, "end": 8, "value": "five"}]}]"#;
        assert!(matches!(parse_span_docs(mismatch), Err(IngestError::Span { .. })));
        assert!(matches!(parse_span_docs("{"), Err(IngestError::SpanFormat(_))));
    }

    #[test]
    fn frame_assembly() {
        let record = parse_span_docs(
            r#"[{"id": "d", "text": "for four people", "labels": [{"slot": "people", "start": 4, "end": 8}]}]"#,
        )
        .unwrap()
        .remove(0);
        let requested = vec!["people".to_string()];
        let framed = assemble_context(&record, &requested, &FrameOptions::default());
        let prefix = "the system asked about people. ";
        assert_eq!(framed.context, format!("{prefix}for four people"));
        assert_eq!(framed.context_offset, char_len(prefix));
        assert_eq!(framed.context_offset, 31);
        assert_eq!((framed.slots[0].start, framed.slots[0].end), (35, 39));
        assert!(validate_record(&framed).is_empty());

        let off = FrameOptions::new(false, FrameOptions::DEFAULT_TEMPLATE, " ").unwrap();
        let bare = assemble_context(&record, &requested, &off);
        assert_eq!(bare.context, "for four people");
        assert_eq!(bare.context_offset, 0);

        assert_eq!(assemble_context(&record, &[], &FrameOptions::default()), record);

        // Re-assembling an already framed record starts from the utterance.
        let twice = assemble_context(&framed, &requested, &FrameOptions::default());
        assert_eq!(twice, framed);
    }

    #[test]
    fn frame_template_needs_one_placeholder() {
        assert!(FrameOptions::new(true, "no placeholder", " ").is_err());
        assert!(FrameOptions::new(true, "{} and {}", " ").is_err());
    }
}
