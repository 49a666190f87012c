//! From span-QA predictions back to slots and intents, and micro-F1 against gold.
//!
//! A prediction file maps item ids to
//! `{"text": str, "span_score": number, "no_answer_score": number}`.
//! A question is answered when its span score beats its no-answer score and
//! the answer is non-empty. Among the questions of one slot, the answered one
//! with the highest span score gives the slot value. An intent is predicted
//! when its yes/no question is answered "yes".

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{char_len, ItemId, ItemKind, NluRecord, QaCorpus};

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no prediction for item '{0}'")]
    MissingPrediction(String),
    #[error("malformed prediction file: {0}")]
    PredictionFormat(String),
    #[error("record ids differ between gold and predictions: missing {missing:?}, unexpected {unexpected:?}")]
    IdMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("no reports to aggregate")]
    NoReports,
    #[error("reports score different tasks")]
    MixedTasks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub text: String,
    pub span_score: f64,
    pub no_answer_score: f64,
}

impl Prediction {
    pub fn new(text: &str, span_score: f64, no_answer_score: f64) -> Self {
        Prediction {
            text: text.to_string(),
            span_score,
            no_answer_score,
        }
    }
}

/// Model output keyed by item id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PredictionSet(pub BTreeMap<String, Prediction>);

impl PredictionSet {
    pub fn get(&self, id: &str) -> Option<&Prediction> {
        self.0.get(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, prediction: Prediction) {
        self.0.insert(id.into(), prediction);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Predictions that reproduce the corpus answers: the first gold answer
    /// with scores (1, 0), or an abstention with scores (0, 1).
    pub fn oracle(corpus: &QaCorpus) -> Self {
        let mut set = PredictionSet::default();
        for (_, item) in corpus.items() {
            let prediction = match item.answers.first() {
                Some(answer) => Prediction::new(&answer.text, 1.0, 0.0),
                None => Prediction::new("", 0.0, 1.0),
            };
            set.insert(item.id.clone(), prediction);
        }
        set
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("predictions serialize");
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPredictions {
    pub predictions: PredictionSet,
    pub warnings: Vec<String>,
}

/// Reads a prediction file. With a corpus, ids the corpus does not contain are
/// reported as warnings.
pub fn load_predictions(
    text: &str,
    corpus: Option<&QaCorpus>,
) -> Result<LoadedPredictions, ScoreError> {
    let predictions: PredictionSet =
        serde_json::from_str(text).map_err(|e| ScoreError::PredictionFormat(e.to_string()))?;
    let mut warnings = Vec::new();
    if let Some(corpus) = corpus {
        let known: HashSet<&str> = corpus.items().map(|(_, q)| q.id.as_str()).collect();
        for id in predictions.0.keys() {
            if !known.contains(id.as_str()) {
                warnings.push(format!("prediction for unknown item '{id}'"));
            }
        }
    }
    Ok(LoadedPredictions {
        predictions,
        warnings,
    })
}

/// Lowercase, collapse whitespace, strip leading/trailing punctuation.
pub fn normalize_value(value: &str) -> String {
    let collapsed = collapse_whitespace(&value.to_lowercase());
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

pub fn collapse_whitespace(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn normalize_yes_no(answer: &str) -> String {
    answer
        .to_lowercase()
        .trim_matches(|c: char| c == '.' || c == ',' || c.is_whitespace())
        .to_string()
}

/// A slot value read off a prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedValue {
    pub value: String,
    /// `[start, end)` of the raw answer in the slot paragraph context, when found there.
    pub span: Option<(usize, usize)>,
}

/// Slots and intents decoded for one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedRecord {
    pub record_id: String,
    pub predicted_slots: BTreeMap<String, Vec<PredictedValue>>,
    pub predicted_intents: BTreeSet<String>,
    /// Char length of the slot paragraph context.
    pub context_len: Option<usize>,
}

impl DecodedRecord {
    pub fn new(record_id: impl Into<String>) -> Self {
        DecodedRecord {
            record_id: record_id.into(),
            predicted_slots: BTreeMap::new(),
            predicted_intents: BTreeSet::new(),
            context_len: None,
        }
    }

    pub fn with_slot(mut self, slot: &str, value: &str) -> Self {
        self.predicted_slots
            .entry(slot.to_string())
            .or_default()
            .push(PredictedValue {
                value: value.to_string(),
                span: None,
            });
        self
    }

    pub fn with_intent(mut self, intent: &str) -> Self {
        self.predicted_intents.insert(intent.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeOptions {
    /// An answer counts when `span_score > no_answer_score + null_threshold`.
    pub null_threshold: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            null_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decoded {
    pub records: Vec<DecodedRecord>,
    pub warnings: Vec<String>,
}

// The utterance is the context's suffix, so the last occurrence is the likeliest one.
fn char_rfind(haystack: &str, needle: &str) -> Option<usize> {
    haystack.rfind(needle).map(|b| char_len(&haystack[..b]))
}

struct Best<'a> {
    score: f64,
    text: &'a str,
    span: Option<(usize, usize)>,
}

fn record_entry<'m>(
    records: &'m mut IndexMap<String, DecodedRecord>,
    record_id: &str,
) -> &'m mut DecodedRecord {
    records
        .entry(record_id.to_string())
        .or_insert_with(|| DecodedRecord::new(record_id))
}

/// Slot values per record. Items whose ids were not produced by this toolkit are skipped.
pub fn decode_slots(
    preds: &PredictionSet,
    corpus: &QaCorpus,
    opts: &DecodeOptions,
) -> Result<Decoded, ScoreError> {
    let mut records: IndexMap<String, DecodedRecord> = IndexMap::new();
    let mut best: IndexMap<(String, String), Option<Best>> = IndexMap::new();
    for (context, item) in corpus.items() {
        let Some(id) = ItemId::parse(&item.id) else {
            continue;
        };
        if id.kind != ItemKind::Slot {
            continue;
        }
        let pred = preds
            .get(&item.id)
            .ok_or_else(|| ScoreError::MissingPrediction(item.id.clone()))?;
        record_entry(&mut records, &id.record_id).context_len = Some(char_len(context));
        let slot_best = best.entry((id.record_id, id.label)).or_insert(None);
        let answered = pred.span_score > pred.no_answer_score + opts.null_threshold
            && !pred.text.trim().is_empty();
        if !answered {
            continue;
        }
        if slot_best.as_ref().is_none_or(|b| pred.span_score > b.score) {
            let start = item
                .answers
                .iter()
                .find(|a| a.text == pred.text)
                .map(|a| a.answer_start)
                .or_else(|| char_rfind(context, &pred.text));
            let span = start.map(|s| (s, s + char_len(&pred.text)));
            *slot_best = Some(Best {
                score: pred.span_score,
                text: &pred.text,
                span,
            });
        }
    }
    for ((record_id, slot), found) in best {
        if let Some(found) = found {
            records[&record_id]
                .predicted_slots
                .entry(slot)
                .or_default()
                .push(PredictedValue {
                    value: collapse_whitespace(found.text),
                    span: found.span,
                });
        }
    }
    Ok(Decoded {
        records: records.into_values().collect(),
        warnings: Vec::new(),
    })
}

/// Predicted intent sets per record.
pub fn decode_intents(preds: &PredictionSet, corpus: &QaCorpus) -> Result<Decoded, ScoreError> {
    let mut records: IndexMap<String, DecodedRecord> = IndexMap::new();
    let mut warnings = Vec::new();
    for (_, item) in corpus.items() {
        let Some(id) = ItemId::parse(&item.id) else {
            continue;
        };
        if id.kind != ItemKind::Intent {
            continue;
        }
        let pred = preds
            .get(&item.id)
            .ok_or_else(|| ScoreError::MissingPrediction(item.id.clone()))?;
        let entry = record_entry(&mut records, &id.record_id);
        match normalize_yes_no(&pred.text).as_str() {
            "yes" => {
                entry.predicted_intents.insert(id.label);
            }
            "no" => {}
            other => warnings.push(format!(
                "item '{}': answer '{other}' is neither yes nor no; read as no",
                item.id
            )),
        }
    }
    Ok(Decoded {
        records: records.into_values().collect(),
        warnings,
    })
}

/// Slots and intents together, one entry per record in corpus order.
pub fn decode(
    preds: &PredictionSet,
    corpus: &QaCorpus,
    opts: &DecodeOptions,
) -> Result<Decoded, ScoreError> {
    let slots = decode_slots(preds, corpus, opts)?;
    let intents = decode_intents(preds, corpus)?;
    let mut merged: IndexMap<String, DecodedRecord> = slots
        .records
        .into_iter()
        .map(|r| (r.record_id.clone(), r))
        .collect();
    for record in intents.records {
        record_entry(&mut merged, &record.record_id).predicted_intents = record.predicted_intents;
    }
    Ok(Decoded {
        records: merged.into_values().collect(),
        warnings: intents.warnings,
    })
}

/// Precision, recall and F1 from pooled counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl TaskScore {
    /// Empty gold with empty predictions scores 1.0 across the board.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        if tp + fp + fn_ == 0 {
            return TaskScore {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                tp,
                fp,
                fn_,
            };
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        TaskScore {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    fn from_sets<T: Ord>(gold: &BTreeSet<T>, predicted: &BTreeSet<T>) -> Self {
        let tp = predicted.intersection(gold).count();
        TaskScore::from_counts(tp, predicted.len() - tp, gold.len() - tp)
    }
}

/// Provenance echoed into report files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_mode: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<TaskScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<TaskScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_seed: Option<u64>,
    #[serde(default)]
    pub config: ReportConfig,
}

impl EvalReport {
    /// Combines a slot-only and an intent-only report.
    pub fn merge(self, other: EvalReport) -> EvalReport {
        EvalReport {
            slot: self.slot.or(other.slot),
            intent: self.intent.or(other.intent),
            run_seed: self.run_seed.or(other.run_seed),
            config: self.config,
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

/// How predicted slot values are matched against gold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SlotMatch {
    /// Normalized value strings.
    #[default]
    Value,
    /// Exact character offsets within the utterance.
    Offsets,
}

fn check_ids(gold: &[NluRecord], decoded: &[DecodedRecord]) -> Result<(), ScoreError> {
    let gold_ids: BTreeSet<&str> = gold.iter().map(|r| r.record_id.as_str()).collect();
    let pred_ids: BTreeSet<&str> = decoded.iter().map(|r| r.record_id.as_str()).collect();
    if gold_ids == pred_ids {
        return Ok(());
    }
    Err(ScoreError::IdMismatch {
        missing: gold_ids.difference(&pred_ids).map(|s| s.to_string()).collect(),
        unexpected: pred_ids.difference(&gold_ids).map(|s| s.to_string()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SlotKey {
    Value(String),
    Offsets(i64, i64),
}

/// Micro-averaged slot F1 over (record, slot, value) triples.
pub fn slot_f1(
    gold: &[NluRecord],
    decoded: &[DecodedRecord],
    mode: SlotMatch,
) -> Result<EvalReport, ScoreError> {
    check_ids(gold, decoded)?;
    let mut gold_set = BTreeSet::new();
    let mut utterance_len = HashMap::new();
    for record in gold {
        utterance_len.insert(record.record_id.as_str(), char_len(&record.utterance) as i64);
        for span in &record.slots {
            let key = match mode {
                SlotMatch::Value => SlotKey::Value(normalize_value(&span.value)),
                SlotMatch::Offsets => SlotKey::Offsets(
                    (span.start - record.context_offset) as i64,
                    (span.end - record.context_offset) as i64,
                ),
            };
            gold_set.insert((record.record_id.as_str(), span.slot_name.as_str(), key));
        }
    }
    let mut pred_set = BTreeSet::new();
    for record in decoded {
        // Predicted offsets are in slot-paragraph coordinates; the utterance is its suffix.
        let shift = record
            .context_len
            .map_or(0, |len| len as i64 - utterance_len[record.record_id.as_str()]);
        for (slot, values) in &record.predicted_slots {
            for value in values {
                let key = match mode {
                    SlotMatch::Value => SlotKey::Value(normalize_value(&value.value)),
                    SlotMatch::Offsets => match value.span {
                        Some((s, e)) => SlotKey::Offsets(s as i64 - shift, e as i64 - shift),
                        None => SlotKey::Offsets(-1, -1),
                    },
                };
                pred_set.insert((record.record_id.as_str(), slot.as_str(), key));
            }
        }
    }
    Ok(EvalReport {
        slot: Some(TaskScore::from_sets(&gold_set, &pred_set)),
        config: ReportConfig {
            match_mode: Some(
                match mode {
                    SlotMatch::Value => "value",
                    SlotMatch::Offsets => "offsets",
                }
                .into(),
            ),
            ..Default::default()
        },
        ..Default::default()
    })
}

/// Micro-averaged intent F1 over (record, intent) pairs.
pub fn intent_f1(gold: &[NluRecord], decoded: &[DecodedRecord]) -> Result<EvalReport, ScoreError> {
    check_ids(gold, decoded)?;
    let gold_set: BTreeSet<(&str, &str)> = gold
        .iter()
        .flat_map(|r| r.intents.iter().map(move |i| (r.record_id.as_str(), i.as_str())))
        .collect();
    let pred_set: BTreeSet<(&str, &str)> = decoded
        .iter()
        .flat_map(|r| {
            r.predicted_intents
                .iter()
                .map(move |i| (r.record_id.as_str(), i.as_str()))
        })
        .collect();
    Ok(EvalReport {
        intent: Some(TaskScore::from_sets(&gold_set, &pred_set)),
        ..Default::default()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

impl MetricSummary {
    fn of(scores: &[TaskScore]) -> Self {
        let pick = |f: fn(&TaskScore) -> f64| MeanStd::of(&scores.iter().map(f).collect::<Vec<_>>());
        MetricSummary {
            precision: pick(|s| s.precision),
            recall: pick(|s| s.recall),
            f1: pick(|s| s.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub seeds: Vec<Option<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<MetricSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<MetricSummary>,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("summary serializes");
        out.push('\n');
        out
    }
}

/// Mean and sample standard deviation of every metric across runs.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<RunSummary, ScoreError> {
    let first = reports.first().ok_or(ScoreError::NoReports)?;
    let same_task = reports
        .iter()
        .all(|r| r.slot.is_some() == first.slot.is_some() && r.intent.is_some() == first.intent.is_some());
    if !same_task {
        return Err(ScoreError::MixedTasks);
    }
    let slot: Vec<TaskScore> = reports.iter().filter_map(|r| r.slot).collect();
    let intent: Vec<TaskScore> = reports.iter().filter_map(|r| r.intent).collect();
    Ok(RunSummary {
        runs: reports.len(),
        seeds: reports.iter().map(|r| r.run_seed).collect(),
        slot: (!slot.is_empty()).then(|| MetricSummary::of(&slot)),
        intent: (!intent.is_empty()).then(|| MetricSummary::of(&intent)),
    })
}
