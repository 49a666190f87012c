//! Shared domain types: annotated NLU records and the SQuAD2.0-shaped corpus.
//!
//! All offsets are counted in Unicode scalar values (`char`s), never bytes.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of Unicode scalar values in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring of `s` between char offsets `[start, end)`, or `None` when out of bounds.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let begin = byte_offset(s, start)?;
    let stop = byte_offset(s, end)?;
    Some(&s[begin..stop])
}

/// Char offset of the first occurrence of `needle` in `haystack`.
pub fn char_find(haystack: &str, needle: &str) -> Option<usize> {
    haystack
        .find(needle)
        .map(|byte| haystack[..byte].chars().count())
}

fn byte_offset(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    match s.char_indices().nth(char_idx) {
        Some((byte, _)) => Some(byte),
        None if char_len(s) == char_idx => Some(s.len()),
        None => None,
    }
}

/// A labelled slot value located in a record's context.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotSpan {
    pub slot_name: String,
    /// Inclusive start, in chars.
    pub start: usize,
    /// Exclusive end, in chars.
    pub end: usize,
    pub value: String,
}

impl SlotSpan {
    /// Builds a span by slicing `context`. Returns `None` for out-of-bounds offsets.
    pub fn from_context(
        slot_name: impl Into<String>,
        context: &str,
        start: usize,
        end: usize,
    ) -> Option<Self> {
        let value = char_slice(context, start, end)?.to_string();
        Some(SlotSpan {
            slot_name: slot_name.into(),
            start,
            end,
            value,
        })
    }

    pub fn shifted(&self, by: usize) -> SlotSpan {
        SlotSpan {
            start: self.start + by,
            end: self.end + by,
            ..self.clone()
        }
    }
}

/// One annotated utterance.
///
/// `context` is the text questions are asked against: the utterance itself,
/// or the utterance behind an assembled dialogue frame. Span offsets always
/// refer to `context`; `context_offset` is the length of any prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluRecord {
    pub record_id: String,
    pub utterance: String,
    pub context: String,
    pub context_offset: usize,
    pub slots: Vec<SlotSpan>,
    pub intents: BTreeSet<String>,
    /// Slots the system side asked about in the previous turn, when known.
    #[serde(default)]
    pub requested_slots: Vec<String>,
}

impl NluRecord {
    /// A record whose context is the bare utterance.
    pub fn new(record_id: impl Into<String>, utterance: impl Into<String>) -> Self {
        let utterance = utterance.into();
        NluRecord {
            record_id: record_id.into(),
            context: utterance.clone(),
            utterance,
            context_offset: 0,
            slots: Vec::new(),
            intents: BTreeSet::new(),
            requested_slots: Vec::new(),
        }
    }

    /// Adds a span located at `[start, end)` of the current context.
    ///
    /// # Panics
    /// When the offsets fall outside the context.
    pub fn with_span(mut self, slot_name: &str, start: usize, end: usize) -> Self {
        let span = SlotSpan::from_context(slot_name, &self.context, start, end)
            .unwrap_or_else(|| panic!("span [{start},{end}) out of bounds"));
        self.slots.push(span);
        self
    }

    pub fn with_intent(mut self, intent: &str) -> Self {
        self.intents.insert(intent.to_string());
        self
    }

    /// Distinct slot names annotated on this record, sorted.
    pub fn slot_names(&self) -> BTreeSet<&str> {
        self.slots.iter().map(|s| s.slot_name.as_str()).collect()
    }

    /// Spans of `slot`, sorted by start offset.
    pub fn spans_of(&self, slot: &str) -> Vec<&SlotSpan> {
        let mut spans: Vec<&SlotSpan> =
            self.slots.iter().filter(|s| s.slot_name == slot).collect();
        spans.sort_by_key(|s| (s.start, s.end));
        spans
    }
}

/// A broken invariant, reported as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Labels may not contain the item-id separator.
pub(crate) fn label_is_valid(label: &str) -> bool {
    !label.is_empty() && !label.contains(ItemId::SEPARATOR)
}

/// Checks a single record's invariants. An empty list means the record is valid.
pub fn validate_record(record: &NluRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if record.record_id.is_empty() {
        out.push(Violation::new("record_id", "empty record id"));
    }
    let ctx_len = char_len(&record.context);
    if !record.context.ends_with(record.utterance.as_str()) {
        out.push(Violation::new("context", "context does not end with the utterance"));
    } else if record.context_offset + char_len(&record.utterance) != ctx_len {
        out.push(Violation::new(
            "context_offset",
            format!(
                "offset {} does not match the prefix length {}",
                record.context_offset,
                ctx_len - char_len(&record.utterance)
            ),
        ));
    }
    for span in &record.slots {
        if span.slot_name.is_empty() {
            out.push(Violation::new("SlotSpan", "empty slot name"));
        } else if !label_is_valid(&span.slot_name) {
            out.push(Violation::new(
                "SlotSpan",
                format!("slot name '{}' contains '|'", span.slot_name),
            ));
        }
        if span.start == span.end {
            out.push(Violation::new("SlotSpan", "empty span"));
            continue;
        }
        if span.start > span.end || span.end > ctx_len {
            out.push(Violation::new(
                "SlotSpan",
                format!(
                    "span [{},{}) of slot '{}' out of bounds for context of length {}",
                    span.start, span.end, span.slot_name, ctx_len
                ),
            ));
            continue;
        }
        let actual = char_slice(&record.context, span.start, span.end).unwrap_or_default();
        if actual != span.value {
            out.push(Violation::new(
                "SlotSpan",
                format!(
                    "value mismatch for slot '{}' at [{},{}): annotated '{}', context has '{}'",
                    span.slot_name, span.start, span.end, span.value, actual
                ),
            ));
        }
    }
    for intent in &record.intents {
        if !label_is_valid(intent) {
            out.push(Violation::new(
                "intents",
                format!("invalid intent label '{intent}'"),
            ));
        }
    }
    out
}

/// Dataset-level checks: per-record invariants, id uniqueness, and (optionally)
/// membership of every slot in a known schema.
pub fn validate_dataset(records: &[NluRecord], slot_schema: Option<&[String]>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let schema: Option<HashSet<&str>> =
        slot_schema.map(|s| s.iter().map(String::as_str).collect());
    for record in records {
        if !seen.insert(record.record_id.as_str()) {
            out.push(Violation::new(
                "record_id",
                format!("duplicate record id '{}'", record.record_id),
            ));
        }
        for v in validate_record(record) {
            out.push(Violation::new(
                format!("{}.{}", record.record_id, v.field),
                v.rule,
            ));
        }
        if let Some(schema) = &schema {
            for span in &record.slots {
                if !schema.contains(span.slot_name.as_str()) {
                    out.push(Violation::new(
                        format!("{}.SlotSpan", record.record_id),
                        format!("slot '{}' not in the slot schema", span.slot_name),
                    ));
                }
            }
        }
    }
    out
}

/// Whether a QA item asks about a slot or an intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemKind {
    Slot,
    Intent,
}

impl ItemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Slot => "slot",
            ItemKind::Intent => "intent",
        }
    }
}

/// Structured form of `{record_id}|{kind}|{label}|{question_index}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemId {
    pub record_id: String,
    pub kind: ItemKind,
    pub label: String,
    pub question_index: usize,
}

impl ItemId {
    pub const SEPARATOR: char = '|';

    pub fn slot(record_id: &str, slot: &str, question_index: usize) -> Self {
        ItemId {
            record_id: record_id.to_string(),
            kind: ItemKind::Slot,
            label: slot.to_string(),
            question_index,
        }
    }

    pub fn intent(record_id: &str, intent: &str) -> Self {
        ItemId {
            record_id: record_id.to_string(),
            kind: ItemKind::Intent,
            label: intent.to_string(),
            question_index: 0,
        }
    }

    /// Parses an id produced by this toolkit. The record id may itself contain
    /// the separator; the label may not.
    pub fn parse(id: &str) -> Option<Self> {
        let mut parts = id.rsplitn(4, Self::SEPARATOR);
        let question_index = parts.next()?.parse().ok()?;
        let label = parts.next()?;
        let kind = match parts.next()? {
            "slot" => ItemKind::Slot,
            "intent" => ItemKind::Intent,
            _ => return None,
        };
        let record_id = parts.next()?;
        if label.is_empty() {
            return None;
        }
        Some(ItemId {
            record_id: record_id.to_string(),
            kind,
            label: label.to_string(),
            question_index,
        })
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}",
            self.record_id,
            self.kind.as_str(),
            self.label,
            self.question_index
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub answer_start: usize,
}

/// One extractive QA example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub question: String,
    pub answers: Vec<Answer>,
    pub is_impossible: bool,
}

impl QaItem {
    pub fn answerable(id: String, question: String, answers: Vec<Answer>) -> Self {
        QaItem {
            id,
            question,
            answers,
            is_impossible: false,
        }
    }

    pub fn impossible(id: String, question: String) -> Self {
        QaItem {
            id,
            question,
            answers: Vec::new(),
            is_impossible: true,
        }
    }

    /// Checks the item against the context of its paragraph.
    pub fn validate(&self, context: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.is_impossible != self.answers.is_empty() {
            out.push(Violation::new(
                self.id.clone(),
                format!(
                    "is_impossible={} with {} answers",
                    self.is_impossible,
                    self.answers.len()
                ),
            ));
        }
        for answer in &self.answers {
            let end = answer.answer_start + char_len(&answer.text);
            match char_slice(context, answer.answer_start, end) {
                Some(found) if found == answer.text => {}
                found => out.push(Violation::new(
                    self.id.clone(),
                    format!(
                        "answer '{}' at {} does not match context ({})",
                        answer.text,
                        answer.answer_start,
                        found.map_or_else(|| "out of bounds".to_string(), |f| format!("'{f}'"))
                    ),
                )),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub context: String,
    pub qas: Vec<QaItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaGroup {
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

/// A SQuAD2.0-shaped collection of QA items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaCorpus {
    pub version: String,
    #[serde(rename = "data")]
    pub groups: Vec<QaGroup>,
}

impl Default for QaCorpus {
    fn default() -> Self {
        QaCorpus {
            version: QaCorpus::VERSION.to_string(),
            groups: Vec::new(),
        }
    }
}

impl QaCorpus {
    pub const VERSION: &'static str = "v2.0";

    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.groups.iter().flat_map(|g| g.paragraphs.iter())
    }

    /// Every item paired with the context it is asked against.
    pub fn items(&self) -> impl Iterator<Item = (&str, &QaItem)> {
        self.paragraphs()
            .flat_map(|p| p.qas.iter().map(move |q| (p.context.as_str(), q)))
    }

    pub fn item_count(&self) -> usize {
        self.paragraphs().map(|p| p.qas.len()).sum()
    }

    pub fn impossible_count(&self) -> usize {
        self.items().filter(|(_, q)| q.is_impossible).count()
    }

    /// Unique ids and per-item answer checks across the whole corpus.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (context, item) in self.items() {
            if !seen.insert(item.id.as_str()) {
                out.push(Violation::new(item.id.clone(), "duplicate item id"));
            }
            out.extend(item.validate(context));
        }
        out
    }
}
