//! Few-shot subsets: uniform, at least `n` records per slot, or at least `n`
//! records per intent.
//!
//! The stratified samplers are greedy. Labels are visited rarest first; while
//! a label is short of its quota, one more record bearing it is drawn, choosing
//! uniformly (seeded) among the candidates that bring the most still-short
//! labels with them. A drawn record counts toward every label it bears.
//! Candidates are always ordered by record id, so the result does not depend
//! on input order beyond the final ordering, which follows the dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;
use crate::schema::NluRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("cannot draw {requested} records from {available}")]
    TooMany { requested: usize, available: usize },
    #[error("{kind} '{label}' occurs in {support} records, fewer than the quota {quota}")]
    Unsatisfiable {
        kind: &'static str,
        label: String,
        support: usize,
        quota: usize,
    },
    #[error("unknown sampling strategy '{0}' (expected uniform, per-slot or per-intent)")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Uniform,
    PerSlot,
    PerIntent,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::PerSlot => "per-slot",
            Strategy::PerIntent => "per-intent",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = SampleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Strategy::Uniform),
            "per-slot" => Ok(Strategy::PerSlot),
            "per-intent" => Ok(Strategy::PerIntent),
            other => Err(SampleError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleOptions {
    /// Downgrade unsatisfiable quotas to warnings and cover what is possible.
    pub allow_partial: bool,
}

/// Chosen positions into the input, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Selection {
    pub fn records(&self, records: &[NluRecord]) -> Vec<NluRecord> {
        self.indices.iter().map(|&i| records[i].clone()).collect()
    }
}

/// Input positions ordered by record id, ties by position.
fn id_order(records: &[NluRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].record_id.cmp(&records[b].record_id).then(a.cmp(&b)));
    order
}

pub fn select_uniform(records: &[NluRecord], n: usize, seed: u64) -> Result<Selection, SampleError> {
    if n > records.len() {
        return Err(SampleError::TooMany {
            requested: n,
            available: records.len(),
        });
    }
    let order = id_order(records);
    let mut rng = SeededRng::new(seed);
    let mut indices: Vec<usize> = rng
        .choose_k(order.len(), n)
        .into_iter()
        .map(|k| order[k])
        .collect();
    indices.sort_unstable();
    Ok(Selection {
        indices,
        warnings: Vec::new(),
    })
}

fn select_covering(
    records: &[NluRecord],
    kind: &'static str,
    label_sets: Vec<BTreeSet<&str>>,
    n: usize,
    seed: u64,
    opts: SampleOptions,
) -> Result<Selection, SampleError> {
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for labels in &label_sets {
        for &label in labels {
            *support.entry(label).or_default() += 1;
        }
    }
    let mut visit: Vec<(&str, usize)> = support.iter().map(|(&l, &s)| (l, s)).collect();
    visit.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));

    let mut warnings = Vec::new();
    for &(label, count) in &visit {
        if count < n {
            let err = SampleError::Unsatisfiable {
                kind,
                label: label.to_string(),
                support: count,
                quota: n,
            };
            if !opts.allow_partial {
                return Err(err);
            }
            warnings.push(err.to_string());
        }
    }

    let order = id_order(records);
    let mut rng = SeededRng::new(seed);
    let mut chosen = vec![false; records.len()];
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let short = |counts: &BTreeMap<&str, usize>, label: &str| {
        counts.get(label).copied().unwrap_or(0) < n
    };

    for &(label, _) in &visit {
        while short(&counts, label) {
            let candidates: Vec<(usize, usize)> = order
                .iter()
                .copied()
                .filter(|&i| !chosen[i] && label_sets[i].contains(label))
                .map(|i| {
                    let gain = label_sets[i].iter().filter(|l| short(&counts, l)).count();
                    (i, gain)
                })
                .collect();
            let Some(best) = candidates.iter().map(|&(_, g)| g).max() else {
                break;
            };
            let tier: Vec<usize> = candidates
                .iter()
                .filter(|&&(_, g)| g == best)
                .map(|&(i, _)| i)
                .collect();
            let pick = tier[rng.below(tier.len())];
            chosen[pick] = true;
            for &l in &label_sets[pick] {
                *counts.entry(l).or_default() += 1;
            }
        }
    }

    let indices = (0..records.len()).filter(|&i| chosen[i]).collect();
    Ok(Selection { indices, warnings })
}

pub fn select_per_slot(
    records: &[NluRecord],
    n: usize,
    seed: u64,
    opts: SampleOptions,
) -> Result<Selection, SampleError> {
    let label_sets = records.iter().map(NluRecord::slot_names).collect();
    select_covering(records, "slot", label_sets, n, seed, opts)
}

pub fn select_per_intent(
    records: &[NluRecord],
    n: usize,
    seed: u64,
    opts: SampleOptions,
) -> Result<Selection, SampleError> {
    let label_sets = records
        .iter()
        .map(|r| r.intents.iter().map(String::as_str).collect())
        .collect();
    select_covering(records, "intent", label_sets, n, seed, opts)
}

pub fn select(
    records: &[NluRecord],
    strategy: Strategy,
    n: usize,
    seed: u64,
    opts: SampleOptions,
) -> Result<Selection, SampleError> {
    match strategy {
        Strategy::Uniform => select_uniform(records, n, seed),
        Strategy::PerSlot => select_per_slot(records, n, seed, opts),
        Strategy::PerIntent => select_per_intent(records, n, seed, opts),
    }
}

/// `n` records drawn uniformly without replacement, in dataset order.
pub fn sample_uniform(
    records: &[NluRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<NluRecord>, SampleError> {
    Ok(select_uniform(records, n, seed)?.records(records))
}

/// A subset in which every slot is annotated on at least `n` records.
pub fn sample_per_slot(
    records: &[NluRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<NluRecord>, SampleError> {
    Ok(select_per_slot(records, n, seed, SampleOptions::default())?.records(records))
}

/// A subset in which every intent is carried by at least `n` records.
pub fn sample_per_intent(
    records: &[NluRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<NluRecord>, SampleError> {
    Ok(select_per_intent(records, n, seed, SampleOptions::default())?.records(records))
}

/// Provenance for a sampled subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub strategy: Strategy,
    pub seed: u64,
    pub n: usize,
    pub total_records: usize,
    pub sampled_records: usize,
    pub record_ids: Vec<String>,
    /// Number of sampled records bearing each slot.
    pub slot_counts: BTreeMap<String, usize>,
    /// Number of sampled records bearing each intent.
    pub intent_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SampleManifest {
    pub fn new(
        records: &[NluRecord],
        selection: &Selection,
        strategy: Strategy,
        n: usize,
        seed: u64,
    ) -> Self {
        let sampled: Vec<&NluRecord> = selection.indices.iter().map(|&i| &records[i]).collect();
        let mut slot_counts = BTreeMap::new();
        let mut intent_counts = BTreeMap::new();
        for record in &sampled {
            for slot in record.slot_names() {
                *slot_counts.entry(slot.to_string()).or_default() += 1;
            }
            for intent in &record.intents {
                *intent_counts.entry(intent.clone()).or_default() += 1;
            }
        }
        SampleManifest {
            strategy,
            seed,
            n,
            total_records: records.len(),
            sampled_records: sampled.len(),
            record_ids: sampled.iter().map(|r| r.record_id.clone()).collect(),
            slot_counts,
            intent_counts,
            warnings: selection.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serializes");
        out.push('\n');
        out
    }
}
