//! Tooling for casting natural language understanding (slot filling and
//! intent detection) as extractive question answering.
//!
//! The pipeline around a QA model is:
//!
//! 1. [`ingest`] annotated utterances (BIO token files or char-span documents),
//!    optionally assembling a dialogue frame in front of each utterance;
//! 2. expand a [`questions`] catalog so every slot has at least one question;
//! 3. [`convert`] records into a SQuAD2.0 corpus, one question per
//!    (slot, question) pair and one yes/no question per intent;
//! 4. draw few-shot training subsets with [`sample`];
//! 5. after fine-tuning and inference elsewhere, [`score`] the span
//!    predictions back into slot F1 and intent F1.

pub mod convert;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod questions;
pub mod rng;
pub mod sample;
pub mod schema;
pub mod score;

pub use error::{Error, Result};
pub use schema::{
    Answer, ItemId, ItemKind, NluRecord, Paragraph, QaCorpus, QaGroup, QaItem, SlotSpan,
    Violation,
};
