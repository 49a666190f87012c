//! End-to-end steps shared by the command line and the C bindings.

use std::fmt;
use std::str::FromStr;

use crate::convert::{build_corpus, BuildOptions};
use crate::error::Result;
use crate::ingest::{
    assemble_context, bio_to_spans, parse_bio, read_span_docs, render_bio, render_span_docs,
    slot_schema, span_doc_to_record, BioSentence, FrameOptions, IngestError, SpanDoc,
};
use crate::questions::{expand_templates, QuestionCatalog};
use crate::schema::{NluRecord, QaCorpus};
use crate::score::{
    decode, intent_f1, slot_f1, DecodeOptions, EvalReport, PredictionSet, ScoreError, SlotMatch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Bio,
    Span,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bio" => Ok(InputFormat::Bio),
            "span" => Ok(InputFormat::Span),
            other => Err(format!("unknown input format '{other}' (expected bio or span)")),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Bio => "bio",
            InputFormat::Span => "span",
        })
    }
}

/// Source units as read, kept so subsets can be written back in the same format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Bio(Vec<BioSentence>),
    Span(Vec<SpanDoc>),
}

/// Parsed records plus the units they came from, index-aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<NluRecord>,
    pub source: Source,
}

impl Dataset {
    pub fn parse(text: &str, format: InputFormat) -> Result<Self> {
        match format {
            InputFormat::Bio => {
                let sentences = parse_bio(text)?;
                let records = sentences.iter().map(bio_to_spans).collect();
                let dataset = Dataset {
                    records,
                    source: Source::Bio(sentences),
                };
                dataset.check_unique_ids()?;
                Ok(dataset)
            }
            InputFormat::Span => {
                let docs = read_span_docs(text)?;
                let records = docs
                    .iter()
                    .map(span_doc_to_record)
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let dataset = Dataset {
                    records,
                    source: Source::Span(docs),
                };
                dataset.check_unique_ids()?;
                Ok(dataset)
            }
        }
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for record in &self.records {
            if !seen.insert(record.record_id.as_str()) {
                return Err(IngestError::Span {
                    record: record.record_id.clone(),
                    message: "duplicate record id".into(),
                }
                .into());
            }
        }
        Ok(())
    }

    pub fn format(&self) -> InputFormat {
        match self.source {
            Source::Bio(_) => InputFormat::Bio,
            Source::Span(_) => InputFormat::Span,
        }
    }

    /// The units at `indices`, rendered in the input format.
    pub fn render_subset(&self, indices: &[usize]) -> String {
        match &self.source {
            Source::Bio(sentences) => {
                let picked: Vec<BioSentence> =
                    indices.iter().map(|&i| sentences[i].clone()).collect();
                render_bio(&picked)
            }
            Source::Span(docs) => {
                let picked: Vec<SpanDoc> = indices.iter().map(|&i| docs[i].clone()).collect();
                render_span_docs(&picked)
            }
        }
    }

    /// Records with frames assembled from their requested slots.
    pub fn framed_records(&self, frame: &FrameOptions) -> Vec<NluRecord> {
        self.records
            .iter()
            .map(|r| assemble_context(r, &r.requested_slots, frame))
            .collect()
    }
}

/// One label per line; blank lines and `#` comments are ignored.
pub fn parse_intent_inventory(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConvertConfig {
    pub build: BuildOptions,
    pub intent_inventory: Option<Vec<String>>,
}

/// Expands the catalog over every slot seen in the catalog or the data, then
/// builds the corpus.
pub fn convert_records(
    records: &[NluRecord],
    catalog: &QuestionCatalog,
    config: &ConvertConfig,
) -> Result<QaCorpus> {
    let mut schema: Vec<(String, Option<String>)> = catalog
        .slot_questions
        .keys()
        .map(|s| (s.clone(), None))
        .collect();
    for slot in slot_schema(records) {
        if !catalog.slot_questions.contains_key(&slot) {
            schema.push((slot, None));
        }
    }
    let expanded = expand_templates(catalog, &schema)?;
    Ok(build_corpus(
        records,
        &expanded,
        config.intent_inventory.as_deref(),
        &config.build,
    )?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Slot,
    Intent,
    Both,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "slot" => Ok(Task::Slot),
            "intent" => Ok(Task::Intent),
            "both" => Ok(Task::Both),
            other => Err(format!("unknown task '{other}' (expected slot, intent or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

/// Decodes predictions over `corpus` and scores them against `gold`.
pub fn score_predictions(
    gold: &[NluRecord],
    corpus: &QaCorpus,
    predictions: &PredictionSet,
    task: Task,
    mode: SlotMatch,
    decode_opts: &DecodeOptions,
) -> std::result::Result<Scored, ScoreError> {
    let decoded = decode(predictions, corpus, decode_opts)?;
    let report = match task {
        Task::Slot => slot_f1(gold, &decoded.records, mode)?,
        Task::Intent => intent_f1(gold, &decoded.records)?,
        Task::Both => {
            slot_f1(gold, &decoded.records, mode)?.merge(intent_f1(gold, &decoded.records)?)
        }
    };
    Ok(Scored {
        report,
        warnings: decoded.warnings,
    })
}
