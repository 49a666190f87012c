//! NLU records to SQuAD2.0 corpora, corpus merging, and the SQuAD2.0 file format.
//!
//! Every record becomes a slot paragraph (the record context, one question per
//! catalog question of every catalog slot) and, optionally, an intent paragraph
//! (`"yes. no. "` + context, one yes/no question per intent label). Slots not
//! annotated on the record yield unanswerable items.

use std::collections::HashSet;

use serde::Deserialize;
use thiserror::Error;

use crate::questions::{intent_question, QuestionCatalog};
use crate::schema::{
    char_len, validate_record, Answer, ItemId, NluRecord, Paragraph, QaCorpus, QaGroup, QaItem,
    Violation,
};

/// Prefix put in front of the context of intent items.
pub const YES_NO_PREFIX: &str = "yes. no. ";
pub const YES_START: usize = 0;
pub const NO_START: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConvertError {
    #[error("record '{record}' is invalid: {violations}")]
    InvalidRecord { record: String, violations: String },
    #[error("record '{record}': slot '{slot}' has no entry in the question catalog")]
    UnknownSlot { record: String, slot: String },
    #[error("record '{record}': slot '{slot}' has an empty question list")]
    NoQuestions { record: String, slot: String },
    #[error("intent inventory is empty")]
    EmptyIntentInventory,
    #[error("item id collision: {}", .0.join(", "))]
    IdCollision(Vec<String>),
    #[error("malformed SQuAD file: {0}")]
    SquadFormat(String),
    #[error("item '{item}': {message}")]
    SquadItem { item: String, message: String },
}

fn check_record(record: &NluRecord) -> Result<(), ConvertError> {
    let violations = validate_record(record);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ConvertError::InvalidRecord {
            record: record.record_id.clone(),
            violations: join_violations(&violations),
        })
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One item per (catalog slot, question). Answers carry every span of the
/// slot sorted by start; slots without spans give unanswerable items.
pub fn build_slot_qas(
    record: &NluRecord,
    catalog: &QuestionCatalog,
) -> Result<Vec<QaItem>, ConvertError> {
    for slot in record.slot_names() {
        match catalog.questions_for(slot) {
            None => {
                return Err(ConvertError::UnknownSlot {
                    record: record.record_id.clone(),
                    slot: slot.to_string(),
                })
            }
            Some([]) => {
                return Err(ConvertError::NoQuestions {
                    record: record.record_id.clone(),
                    slot: slot.to_string(),
                })
            }
            Some(_) => {}
        }
    }

    let mut items = Vec::with_capacity(catalog.slot_question_count());
    for (slot, questions) in &catalog.slot_questions {
        let answers: Vec<Answer> = record
            .spans_of(slot)
            .into_iter()
            .map(|span| Answer {
                text: span.value.clone(),
                answer_start: span.start,
            })
            .collect();
        for (index, question) in questions.iter().enumerate() {
            let id = ItemId::slot(&record.record_id, slot, index).to_string();
            items.push(if answers.is_empty() {
                QaItem::impossible(id, question.clone())
            } else {
                QaItem::answerable(id, question.clone(), answers.clone())
            });
        }
    }
    Ok(items)
}

/// The `"yes. no. "`-prefixed context and one yes/no item per inventory label.
pub fn build_intent_qas(
    record: &NluRecord,
    intent_labels: &[String],
    catalog: &QuestionCatalog,
) -> Result<(String, Vec<QaItem>), ConvertError> {
    if intent_labels.is_empty() {
        return Err(ConvertError::EmptyIntentInventory);
    }
    let context = format!("{YES_NO_PREFIX}{}", record.context);
    let items = intent_labels
        .iter()
        .map(|label| {
            let answer = if record.intents.contains(label) {
                Answer {
                    text: "yes".into(),
                    answer_start: YES_START,
                }
            } else {
                Answer {
                    text: "no".into(),
                    answer_start: NO_START,
                }
            };
            QaItem::answerable(
                ItemId::intent(&record.record_id, label).to_string(),
                intent_question(label, &catalog.intent_question_template),
                vec![answer],
            )
        })
        .collect();
    Ok((context, items))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildOptions {
    pub include_intents: bool,
    /// Group title; conventionally dataset name and split, e.g. `atis_train`.
    pub title: String,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            include_intents: false,
            title: "nlu".into(),
        }
    }
}

/// Builds a corpus with one group titled `opts.title`.
///
/// Without an explicit `intent_inventory` the sorted union of the records'
/// intents is used.
pub fn build_corpus(
    records: &[NluRecord],
    catalog: &QuestionCatalog,
    intent_inventory: Option<&[String]>,
    opts: &BuildOptions,
) -> Result<QaCorpus, ConvertError> {
    let mut corpus = QaCorpus::default();
    if records.is_empty() {
        return Ok(corpus);
    }
    let inventory: Vec<String> = match intent_inventory {
        Some(labels) => labels.to_vec(),
        None => crate::ingest::intent_inventory(records),
    };
    if opts.include_intents {
        let known: HashSet<&str> = inventory.iter().map(String::as_str).collect();
        for record in records {
            for intent in &record.intents {
                if !known.contains(intent.as_str()) {
                    log::warn!(
                        "record '{}': intent '{intent}' is not in the intent inventory",
                        record.record_id
                    );
                }
            }
        }
    }

    let mut ids = HashSet::new();
    let mut paragraphs = Vec::with_capacity(records.len() * 2);
    for record in records {
        check_record(record)?;
        if !ids.insert(record.record_id.as_str()) {
            return Err(ConvertError::IdCollision(vec![record.record_id.clone()]));
        }
        let qas = build_slot_qas(record, catalog)?;
        if !qas.is_empty() {
            paragraphs.push(Paragraph {
                context: record.context.clone(),
                qas,
            });
        }
        if opts.include_intents {
            let (context, qas) = build_intent_qas(record, &inventory, catalog)?;
            paragraphs.push(Paragraph { context, qas });
        }
    }
    corpus.groups.push(QaGroup {
        title: opts.title.clone(),
        paragraphs,
    });
    Ok(corpus)
}

/// Concatenates the groups of `a` and `b`, keeping `a`'s version tag.
pub fn merge_corpora(a: &QaCorpus, b: &QaCorpus) -> Result<QaCorpus, ConvertError> {
    let left: HashSet<&str> = a.items().map(|(_, q)| q.id.as_str()).collect();
    let mut collisions: Vec<String> = b
        .items()
        .map(|(_, q)| q.id.as_str())
        .filter(|id| left.contains(id))
        .map(str::to_string)
        .collect();
    if !collisions.is_empty() {
        collisions.sort();
        collisions.dedup();
        return Err(ConvertError::IdCollision(collisions));
    }
    let mut merged = a.clone();
    merged.groups.extend(b.groups.iter().cloned());
    Ok(merged)
}

/// Serializes a corpus in the SQuAD2.0 layout (two-space indent, trailing newline).
pub fn emit_squad(corpus: &QaCorpus) -> String {
    let mut out = serde_json::to_string_pretty(corpus).expect("corpus serializes");
    out.push('\n');
    out
}

/// How strictly answer offsets are checked when parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Any inconsistency is an error; for files this toolkit wrote.
    #[default]
    Strict,
    /// Offset mismatches and impossible-with-answers items become warnings;
    /// for third-party SQuAD files.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSquad {
    pub corpus: QaCorpus,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct RawCorpus {
    version: String,
    data: Vec<RawGroup>,
}

#[derive(Deserialize)]
struct RawGroup {
    #[serde(default)]
    title: String,
    paragraphs: Vec<RawParagraph>,
}

#[derive(Deserialize)]
struct RawParagraph {
    context: String,
    qas: Vec<RawItem>,
}

#[derive(Deserialize)]
struct RawItem {
    id: String,
    question: String,
    #[serde(default)]
    answers: Vec<Answer>,
    #[serde(default)]
    is_impossible: Option<bool>,
}

/// Parses a SQuAD file (v2.0, or v1.1 without `is_impossible`).
pub fn parse_squad(text: &str, mode: ParseMode) -> Result<ParsedSquad, ConvertError> {
    let raw: RawCorpus =
        serde_json::from_str(text).map_err(|e| ConvertError::SquadFormat(e.to_string()))?;
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut groups = Vec::with_capacity(raw.data.len());
    for raw_group in raw.data {
        let mut paragraphs = Vec::with_capacity(raw_group.paragraphs.len());
        for raw_para in raw_group.paragraphs {
            let mut qas = Vec::with_capacity(raw_para.qas.len());
            for raw_item in raw_para.qas {
                if !seen.insert(raw_item.id.clone()) {
                    return Err(ConvertError::SquadItem {
                        item: raw_item.id,
                        message: "duplicate item id".into(),
                    });
                }
                let mut item = QaItem {
                    is_impossible: raw_item
                        .is_impossible
                        .unwrap_or(raw_item.answers.is_empty()),
                    id: raw_item.id,
                    question: raw_item.question,
                    answers: raw_item.answers,
                };
                if item.is_impossible && !item.answers.is_empty() {
                    if mode == ParseMode::Strict {
                        return Err(ConvertError::SquadItem {
                            item: item.id,
                            message: "impossible item carries answers".into(),
                        });
                    }
                    warnings.push(format!(
                        "item '{}': impossible item carries answers; dropped them",
                        item.id
                    ));
                    item.answers.clear();
                }
                if !item.is_impossible && item.answers.is_empty() {
                    return Err(ConvertError::SquadItem {
                        item: item.id,
                        message: "answerable item without answers".into(),
                    });
                }
                for violation in item.validate(&raw_para.context) {
                    if mode == ParseMode::Strict {
                        return Err(ConvertError::SquadItem {
                            item: item.id.clone(),
                            message: violation.rule,
                        });
                    }
                    warnings.push(format!("item '{}': {}", item.id, violation.rule));
                }
                qas.push(item);
            }
            paragraphs.push(Paragraph {
                context: raw_para.context,
                qas,
            });
        }
        groups.push(QaGroup {
            title: raw_group.title,
            paragraphs,
        });
    }
    Ok(ParsedSquad {
        corpus: QaCorpus {
            version: raw.version,
            groups,
        },
        warnings,
    })
}

/// Answerable and unanswerable item counts.
pub fn answer_counts(corpus: &QaCorpus) -> (usize, usize) {
    let impossible = corpus.impossible_count();
    (corpus.item_count() - impossible, impossible)
}

/// Items a record contributes: Σ|Q_s| over catalog slots, plus one per intent label.
pub fn expected_items_per_record(catalog: &QuestionCatalog, intent_labels: usize) -> usize {
    catalog.slot_question_count() + intent_labels
}

/// Length of the yes/no prefix, in chars.
pub fn yes_no_prefix_len() -> usize {
    char_len(YES_NO_PREFIX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::char_find;

    fn catalog() -> QuestionCatalog {
        QuestionCatalog::default()
            .with_slot(
                "cuisine",
                ["what cuisine was mentioned?", "what type of food was specified?"],
            )
            .with_slot("price range", ["what price range?"])
            .with_slot("area", ["what part of town was mentioned?", "what area?"])
    }

    fn worked_example() -> NluRecord {
        let text = "Show cheap Italian restaurants";
        let italian = char_find(text, "Italian").unwrap();
        let cheap = char_find(text, "cheap").unwrap();
        NluRecord::new("r1", text)
            .with_span("cuisine", italian, italian + 7)
            .with_span("price range", cheap, cheap + 5)
            .with_intent("inform")
    }

    #[test]
    fn worked_example_items() {
        let items = build_slot_qas(&worked_example(), &catalog()).unwrap();
        assert_eq!(items.len(), 5);
        let answer = |i: usize| items[i].answers.first().map(|a| (a.text.as_str(), a.answer_start));
        assert_eq!(items[0].question, "what cuisine was mentioned?");
        assert_eq!(answer(0), Some(("Italian", 11)));
        assert_eq!(answer(1), Some(("Italian", 11)));
        assert_eq!(answer(2), Some(("cheap", 5)));
        assert!(items[3].is_impossible && items[3].answers.is_empty());
        assert!(items[4].is_impossible);
        assert_eq!(items[0].id, "r1|slot|cuisine|0");
        assert_eq!(items[4].id, "r1|slot|area|1");
    }

    #[test]
    fn zero_span_record_is_all_impossible() {
        let record = NluRecord::new("r", "hello there");
        let items = build_slot_qas(&record, &catalog()).unwrap();
        assert!(items.iter().all(|i| i.is_impossible));
    }

    #[test]
    fn repeated_slot_keeps_all_spans_by_start() {
        let text = "from boston or denver";
        let record = NluRecord::new("r", text)
            .with_span("area", 15, 21)
            .with_span("area", 5, 11);
        let items = build_slot_qas(&record, &catalog()).unwrap();
        let area = items.iter().find(|i| i.id == "r|slot|area|0").unwrap();
        let starts: Vec<_> = area.answers.iter().map(|a| (a.answer_start, a.text.as_str())).collect();
        assert_eq!(starts, [(5, "boston"), (15, "denver")]);
    }

    #[test]
    fn unknown_and_empty_slots() {
        let record = NluRecord::new("r", "at noon").with_span("time", 3, 7);
        assert_eq!(
            build_slot_qas(&record, &catalog()),
            Err(ConvertError::UnknownSlot {
                record: "r".into(),
                slot: "time".into()
            })
        );
        let empty = catalog().with_slot("time", Vec::<String>::new());
        assert!(matches!(
            build_slot_qas(&record, &empty),
            Err(ConvertError::NoQuestions { .. })
        ));
    }

    #[test]
    fn intent_items() {
        let record = NluRecord::new("r", "flights to boston").with_intent("atis_flight");
        let inventory = vec!["atis_flight".to_string(), "atis_airfare".to_string()];
        let (context, items) = build_intent_qas(&record, &inventory, &catalog()).unwrap();
        assert_eq!(context, "yes. no. flights to boston");
        assert_eq!(items[0].question, "is the intent asking about atis flight?");
        assert_eq!(items[0].answers[0], Answer { text: "yes".into(), answer_start: 0 });
        assert_eq!(items[1].question, "is the intent asking about atis airfare?");
        assert_eq!(items[1].answers[0], Answer { text: "no".into(), answer_start: 5 });
        assert!(items.iter().all(|i| !i.is_impossible && i.validate(&context).is_empty()));
        assert_eq!(yes_no_prefix_len(), 9);

        let none = NluRecord::new("r", "hi");
        let (_, items) = build_intent_qas(&none, &inventory, &catalog()).unwrap();
        assert!(items.iter().all(|i| i.answers[0].text == "no"));

        let multi = NluRecord::new("r", "hi").with_intent("a").with_intent("b");
        let inv = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let (_, items) = build_intent_qas(&multi, &inv, &catalog()).unwrap();
        let answers: Vec<_> = items.iter().map(|i| i.answers[0].text.as_str()).collect();
        assert_eq!(answers, ["yes", "yes", "no"]);

        assert_eq!(
            build_intent_qas(&record, &[], &catalog()),
            Err(ConvertError::EmptyIntentInventory)
        );
    }

    #[test]
    fn corpus_counts() {
        let records = vec![
            worked_example(),
            NluRecord::new("r2", "cheap food in the west").with_span("area", 18, 22),
        ];
        let inventory: Vec<String> = ["inform", "request", "book"].map(String::from).to_vec();
        let with_intents = BuildOptions {
            include_intents: true,
            ..Default::default()
        };
        let corpus = build_corpus(&records, &catalog(), Some(&inventory), &with_intents).unwrap();
        assert_eq!(corpus.item_count(), 2 * (5 + 3));
        let slots_only =
            build_corpus(&records, &catalog(), Some(&inventory), &BuildOptions::default()).unwrap();
        assert_eq!(slots_only.item_count(), 10);
        let empty = build_corpus(&[], &catalog(), None, &with_intents).unwrap();
        assert_eq!(empty.item_count(), 0);
        assert!(corpus.validate().is_empty());
    }

    #[test]
    fn corpus_rejects_invalid_and_duplicate_records() {
        let mut bad = worked_example();
        bad.slots[0].value = "Thai".into();
        assert!(matches!(
            build_corpus(&[bad], &catalog(), None, &BuildOptions::default()),
            Err(ConvertError::InvalidRecord { .. })
        ));
        assert!(matches!(
            build_corpus(
                &[worked_example(), worked_example()],
                &catalog(),
                None,
                &BuildOptions::default()
            ),
            Err(ConvertError::IdCollision(_))
        ));
    }

    #[test]
    fn merging() {
        let a = build_corpus(&[worked_example()], &catalog(), None, &BuildOptions::default())
            .unwrap();
        let mut other = worked_example();
        other.record_id = "r2".into();
        let b = build_corpus(&[other], &catalog(), None, &BuildOptions::default()).unwrap();
        let merged = merge_corpora(&a, &b).unwrap();
        assert_eq!(merged.item_count(), a.item_count() + b.item_count());
        assert_eq!(merge_corpora(&a, &QaCorpus::default()).unwrap(), a);
        match merge_corpora(&a, &a) {
            Err(ConvertError::IdCollision(ids)) => {
                assert_eq!(ids.len(), 5);
                assert!(ids.contains(&"r1|slot|cuisine|0".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_minimal_impossible_snippet() {
        let text = r#"{"version": "v2.0", "data": [{"title": "t", "paragraphs": [
            {"context": "Some text.", "qas": [
                {"question": "What?", "id": "q1", "answers": [], "is_impossible": true,
                 "plausible_answers": [{"text": "text", "answer_start": 5}]}]}]}]}"#;
        let parsed = parse_squad(text, ParseMode::Strict).unwrap();
        assert_eq!(parsed.corpus.item_count(), 1);
        let (_, item) = parsed.corpus.items().next().unwrap();
        assert!(item.is_impossible);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn offset_mismatch_is_strict_error_lenient_warning() {
        let text = r#"{"version": "v2.0", "data": [{"title": "t", "paragraphs": [
            {"context": "Some  text.", "qas": [
                {"question": "What?", "id": "q1", "answers": [{"text": "text", "answer_start": 5}], "is_impossible": false}]}]}]}"#;
        assert!(matches!(
            parse_squad(text, ParseMode::Strict),
            Err(ConvertError::SquadItem { item, .. }) if item == "q1"
        ));
        let parsed = parse_squad(text, ParseMode::Lenient).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("q1"));
    }

    #[test]
    fn squad_v1_items_are_answerable() {
        let text = r#"{"version": "1.1", "data": [{"title": "t", "paragraphs": [
            {"context": "abc", "qas": [{"question": "q", "id": "x", "answers": [{"text": "b", "answer_start": 1}]}]}]}]}"#;
        let parsed = parse_squad(text, ParseMode::Strict).unwrap();
        assert!(!parsed.corpus.items().next().unwrap().1.is_impossible);
    }

    #[test]
    fn malformed_squad() {
        assert!(matches!(
            parse_squad("[]", ParseMode::Lenient),
            Err(ConvertError::SquadFormat(_))
        ));
    }
}
