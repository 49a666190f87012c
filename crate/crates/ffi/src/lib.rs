//! C bindings for `qanlu`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Strings returned through out-pointers are
//! released with [`qanlu_string_free`]. Every call returns a [`QanluStatus`];
//! on failure [`qanlu_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qanlu::convert::{emit_squad, merge_corpora, parse_squad, BuildOptions, ParseMode};
use qanlu::ingest::FrameOptions;
use qanlu::pipeline::{convert_records, score_predictions, ConvertConfig, Dataset, InputFormat, Task};
use qanlu::questions::{load_catalog, QuestionCatalog};
use qanlu::sample::{select, SampleManifest, SampleOptions, Strategy};
use qanlu::score::{load_predictions, DecodeOptions, SlotMatch};
use qanlu::QaCorpus;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QanluStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Ingest = 4,
    Catalog = 5,
    Convert = 6,
    Sample = 7,
    Score = 8,
    Json = 9,
    Panic = 10,
}

/// A loaded question catalog.
pub struct QanluCatalog(QuestionCatalog);

/// A SQuAD2.0 corpus.
pub struct QanluCorpus(QaCorpus);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(QanluStatus, String);

impl From<qanlu::Error> for Failure {
    fn from(e: qanlu::Error) -> Self {
        let status = match e {
            qanlu::Error::Ingest(_) => QanluStatus::Ingest,
            qanlu::Error::Catalog(_) => QanluStatus::Catalog,
            qanlu::Error::Convert(_) => QanluStatus::Convert,
            qanlu::Error::Sample(_) => QanluStatus::Sample,
            qanlu::Error::Score(_) => QanluStatus::Score,
            qanlu::Error::Io { .. } | qanlu::Error::Json { .. } => QanluStatus::Json,
        };
        Failure(status, e.to_string())
    }
}

macro_rules! lib_err {
    ($e:expr) => {
        $e.map_err(|e| Failure::from(qanlu::Error::from(e)))
    };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QanluStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QanluStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QanluStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(QanluStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(QanluStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(QanluStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure(QanluStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn parse_arg<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(|e| Failure(QanluStatus::InvalidArgument, e))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message for the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn qanlu_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qanlu_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a catalog from its JSON text.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qanlu_catalog_load(json: *const c_char, out: *mut *mut QanluCatalog) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        let catalog = lib_err!(load_catalog(text(json, "json")?))?;
        *out = Box::into_raw(Box::new(QanluCatalog(catalog)));
        Ok(())
    })
}

/// # Safety
/// `catalog` must be null or a handle from [`qanlu_catalog_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qanlu_catalog_free(catalog: *mut QanluCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Converts NLU records (`format` is `"bio"` or `"span"`) into a corpus.
/// With `frame` set, span records get the default frame for their requested slots.
///
/// # Safety
/// String arguments must be valid C strings, `catalog` a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qanlu_convert(
    records: *const c_char,
    format: *const c_char,
    catalog: *const QanluCatalog,
    include_intents: bool,
    frame: bool,
    out: *mut *mut QanluCorpus,
) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        let format: InputFormat = parse_arg(text(format, "format")?)?;
        let catalog = handle(catalog, "catalog")?;
        let dataset = Dataset::parse(text(records, "records")?, format)?;
        let frame = lib_err!(FrameOptions::new(frame, FrameOptions::DEFAULT_TEMPLATE, " "))?;
        let framed = dataset.framed_records(&frame);
        let config = ConvertConfig {
            build: BuildOptions {
                include_intents,
                ..Default::default()
            },
            intent_inventory: None,
        };
        let corpus = convert_records(&framed, &catalog.0, &config)?;
        *out = Box::into_raw(Box::new(QanluCorpus(corpus)));
        Ok(())
    })
}

/// Parses SQuAD2.0 JSON. `lenient` accepts and repairs third-party quirks.
///
/// # Safety
/// `json` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qanlu_corpus_parse(json: *const c_char, lenient: bool, out: *mut *mut QanluCorpus) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        let mode = if lenient { ParseMode::Lenient } else { ParseMode::Strict };
        let parsed = lib_err!(parse_squad(text(json, "json")?, mode))?;
        *out = Box::into_raw(Box::new(QanluCorpus(parsed.corpus)));
        Ok(())
    })
}

/// Serializes a corpus; free the result with [`qanlu_string_free`].
///
/// # Safety
/// `corpus` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qanlu_corpus_emit(corpus: *const QanluCorpus, out: *mut *mut c_char) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        *out = owned_string(emit_squad(&handle(corpus, "corpus")?.0));
        Ok(())
    })
}

/// Number of QA items, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qanlu_corpus_item_count(corpus: *const QanluCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.item_count())
}

/// Concatenates two corpora into a new one; fails on shared item ids.
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qanlu_corpus_merge(
    a: *const QanluCorpus,
    b: *const QanluCorpus,
    out: *mut *mut QanluCorpus,
) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        let merged = lib_err!(merge_corpora(&handle(a, "a")?.0, &handle(b, "b")?.0))?;
        *out = Box::into_raw(Box::new(QanluCorpus(merged)));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qanlu_corpus_free(corpus: *mut QanluCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Samples records and writes the manifest JSON to `out`.
/// `strategy` is `"uniform"`, `"per-slot"` or `"per-intent"`.
///
/// # Safety
/// String arguments must be valid C strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qanlu_sample(
    records: *const c_char,
    format: *const c_char,
    strategy: *const c_char,
    n: usize,
    seed: u64,
    allow_partial: bool,
    out: *mut *mut c_char,
) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        let format: InputFormat = parse_arg(text(format, "format")?)?;
        let strategy: Strategy = lib_err!(text(strategy, "strategy")?.parse::<Strategy>())?;
        let dataset = Dataset::parse(text(records, "records")?, format)?;
        let selection = lib_err!(select(&dataset.records, strategy, n, seed, SampleOptions { allow_partial }))?;
        let manifest = SampleManifest::new(&dataset.records, &selection, strategy, n, seed);
        *out = owned_string(manifest.to_json());
        Ok(())
    })
}

/// Scores predictions made on `corpus` against gold records and writes the
/// report JSON to `out`. `task` is `"slot"`, `"intent"` or `"both"`.
///
/// # Safety
/// String arguments must be valid C strings, `corpus` a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qanlu_score(
    gold: *const c_char,
    gold_format: *const c_char,
    corpus: *const QanluCorpus,
    predictions: *const c_char,
    task: *const c_char,
    offsets: bool,
    out: *mut *mut c_char,
) -> QanluStatus {
    guard(|| {
        out_ptr(out)?;
        let format: InputFormat = parse_arg(text(gold_format, "gold_format")?)?;
        let task: Task = parse_arg(text(task, "task")?)?;
        let corpus = &handle(corpus, "corpus")?.0;
        let gold = Dataset::parse(text(gold, "gold")?, format)?.records;
        let loaded = lib_err!(load_predictions(text(predictions, "predictions")?, Some(corpus)))?;
        let mode = if offsets { SlotMatch::Offsets } else { SlotMatch::Value };
        let scored = lib_err!(score_predictions(
            &gold,
            corpus,
            &loaded.predictions,
            task,
            mode,
            &DecodeOptions::default()
        ))?;
        *out = owned_string(scored.report.to_json());
        Ok(())
    })
}
