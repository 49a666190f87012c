//! Random inputs and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use qanlu::questions::QuestionCatalog;
use qanlu::rng::SeededRng;
use qanlu::schema::{NluRecord, SlotSpan};
use qanlu::score::DecodedRecord;

pub const WORDS: &[&str] = &[
    "show", "me", "flights", "from", "to", "the", "cheapest", "on", "monday", "café",
    "zürich", "new", "york", "dinner", "for", "four", "people", "\"quoted\"", "naïve",
    "tomorrow", "at", "noon", "boston", "denver", "please", "€20", "late", "x\\y",
];
pub const SLOTS: &[&str] = &[
    "city", "fromloc.city_name", "toloc.city_name", "day_name", "price range", "people",
    "time", "cuisine",
];
pub const INTENTS: &[&str] = &["atis_flight", "atis_airfare", "inform", "request", "book", "atis_ground_service"];

fn pick<'a>(rng: &mut SeededRng, items: &[&'a str]) -> &'a str {
    items[rng.below(items.len())]
}

/// Builds the record's text by joining words and computes span offsets on the
/// test side, counting chars directly.
pub fn random_record(rng: &mut SeededRng, id: &str, slots: &[&str], intents: &[&str]) -> NluRecord {
    let n_words = 1 + rng.below(10);
    let words: Vec<&str> = (0..n_words).map(|_| pick(rng, WORDS)).collect();
    let text = words.join(" ");
    let mut starts = Vec::new();
    let mut cursor = 0;
    for w in &words {
        starts.push(cursor);
        cursor += w.chars().count() + 1;
    }
    let mut record = NluRecord::new(id, text.clone());
    let mut i = 0;
    while i < words.len() {
        if rng.below(3) == 0 {
            let len = 1 + rng.below(2).min(words.len() - i - 1);
            let start = starts[i];
            let end = starts[i + len - 1] + words[i + len - 1].chars().count();
            let value: String = text.chars().skip(start).take(end - start).collect();
            record.slots.push(SlotSpan {
                slot_name: pick(rng, slots).to_string(),
                start,
                end,
                value,
            });
            i += len;
        } else {
            i += 1;
        }
    }
    let n_intents = rng.below(3);
    for _ in 0..n_intents {
        record.intents.insert(pick(rng, intents).to_string());
    }
    record
}

pub fn random_records(rng: &mut SeededRng, count: usize, slots: &[&str], intents: &[&str]) -> Vec<NluRecord> {
    (0..count)
        .map(|i| random_record(rng, &format!("rec{i:03}"), slots, intents))
        .collect()
}

/// Same as [`random_records`] but no slot appears twice with different values in one record.
pub fn single_valued(records: Vec<NluRecord>) -> Vec<NluRecord> {
    records
        .into_iter()
        .map(|mut r| {
            let mut seen = BTreeSet::new();
            r.slots.retain(|s| seen.insert(s.slot_name.clone()));
            r
        })
        .collect()
}

pub fn random_catalog(rng: &mut SeededRng, slots: &[&str]) -> QuestionCatalog {
    let mut catalog = QuestionCatalog::default();
    for slot in slots {
        let k = 1 + rng.below(3);
        let questions: Vec<String> = (0..k).map(|q| format!("what {slot} #{q}?")).collect();
        catalog = catalog.with_slot(slot, questions);
    }
    catalog
}

pub fn inventory(labels: &[&str]) -> Vec<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------------------
// Brute-force scorer
// ---------------------------------------------------------------------------

pub fn oracle_normalize(v: &str) -> String {
    let lower = v.to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let joined = words.join(" ");
    let chars: Vec<char> = joined.chars().collect();
    let mut a = 0;
    let mut b = chars.len();
    while a < b && (chars[a].is_ascii_punctuation() || chars[a].is_whitespace()) {
        a += 1;
    }
    while b > a && (chars[b - 1].is_ascii_punctuation() || chars[b - 1].is_whitespace()) {
        b -= 1;
    }
    chars[a..b].iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn push_unique<T: PartialEq>(list: &mut Vec<T>, item: T) {
    if !list.contains(&item) {
        list.push(item);
    }
}

pub fn oracle_prf(gold: &[Vec<String>], pred: &[Vec<String>]) -> OracleScore {
    let mut tp = 0;
    for p in pred {
        if gold.iter().any(|g| g == p) {
            tp += 1;
        }
    }
    let fp = pred.len() - tp;
    let mut fn_ = 0;
    for g in gold {
        if !pred.iter().any(|p| p == g) {
            fn_ += 1;
        }
    }
    if tp + fp + fn_ == 0 {
        return OracleScore { tp, fp, fn_, precision: 1.0, recall: 1.0, f1: 1.0 };
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    OracleScore { tp, fp, fn_, precision, recall, f1 }
}

pub fn oracle_slot_f1(gold: &[NluRecord], decoded: &[DecodedRecord]) -> OracleScore {
    let mut g = Vec::new();
    for r in gold {
        for s in &r.slots {
            push_unique(&mut g, vec![r.record_id.clone(), s.slot_name.clone(), oracle_normalize(&s.value)]);
        }
    }
    let mut p = Vec::new();
    for d in decoded {
        for (slot, values) in &d.predicted_slots {
            for v in values {
                push_unique(&mut p, vec![d.record_id.clone(), slot.clone(), oracle_normalize(&v.value)]);
            }
        }
    }
    oracle_prf(&g, &p)
}

pub fn oracle_intent_f1(gold: &[NluRecord], decoded: &[DecodedRecord]) -> OracleScore {
    let mut g = Vec::new();
    for r in gold {
        for i in &r.intents {
            push_unique(&mut g, vec![r.record_id.clone(), i.clone()]);
        }
    }
    let mut p = Vec::new();
    for d in decoded {
        for i in &d.predicted_intents {
            push_unique(&mut p, vec![d.record_id.clone(), i.clone()]);
        }
    }
    oracle_prf(&g, &p)
}

/// Gold with random corruption: dropped, changed, re-cased and extra values.
pub fn perturbed_predictions(rng: &mut SeededRng, gold: &[NluRecord]) -> Vec<DecodedRecord> {
    gold.iter()
        .map(|r| {
            let mut d = DecodedRecord::new(r.record_id.clone());
            for s in &r.slots {
                match rng.below(5) {
                    0 => {}
                    1 => d = d.with_slot(&s.slot_name, "wrong value"),
                    2 => d = d.with_slot(&s.slot_name, &format!(" {}. ", s.value.to_uppercase())),
                    _ => d = d.with_slot(&s.slot_name, &s.value),
                }
            }
            if rng.below(3) == 0 {
                d = d.with_slot(pick(rng, SLOTS), pick(rng, WORDS));
            }
            for i in &r.intents {
                if rng.below(4) != 0 {
                    d = d.with_intent(i);
                }
            }
            if rng.below(3) == 0 {
                d = d.with_intent(pick(rng, INTENTS));
            }
            d
        })
        .collect()
}
