//! C ABI for protorecon.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `pr_*_free`. Every fallible call returns a
//! [`PrStatus`]; on failure `pr_last_error()` describes the cause until the
//! next failing call on the same thread. Token sequences are passed as
//! UTF-8 strings with tokens separated by single spaces.

// `!(x >= 0.0)` rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use protorecon::corpus::{assemble_reconstruction_input, parse_dataset, Dataset, IngestOptions, Tokenization};
use protorecon::decode::{beam_search, BeamConfig, TokenDecoder};
use protorecon::metrics::{bcubed_f, feature_edit_distance, token_edit_distance, FeatureTable};
use protorecon::models::{load_checkpoint, ReconModel, ReflexModel};
use protorecon::rerank::{rerank, rerank_beam, PredictionCache};
use protorecon::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    OutOfRange = 3,
    Schema = 10,
    Config = 11,
    Vocabulary = 12,
    Dimension = 13,
    Training = 14,
    Checkpoint = 15,
    Contract = 16,
    Data = 17,
    MissingFeatures = 18,
    Io = 19,
    Panic = 99,
}

impl From<&Error> for PrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Schema { .. } => PrStatus::Schema,
            Error::Config(_) => PrStatus::Config,
            Error::Vocabulary(_) => PrStatus::Vocabulary,
            Error::Dimension { .. } => PrStatus::Dimension,
            Error::Training(_) => PrStatus::Training,
            Error::Checkpoint(_) => PrStatus::Checkpoint,
            Error::Contract(_) => PrStatus::Contract,
            Error::Data(_) => PrStatus::Data,
            Error::MissingFeatures(_) => PrStatus::MissingFeatures,
            Error::Io { .. } => PrStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

struct Failure(PrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PrStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

/// Run `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> PrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PrStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PrStatus::NullArgument, format!("`{what}` is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PrStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn split_tokens(s: &str) -> Vec<&str> {
    s.split(' ').filter(|t| !t.is_empty()).collect()
}

/// Message of the last failure on this thread, or null. Owned by the
/// library and valid until the next failing call.
#[no_mangle]
pub extern "C" fn pr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// A parsed cognate table.
pub struct PrDataset {
    inner: Dataset,
}

/// Parse a cognate table from TSV text.
///
/// # Safety
/// `tsv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_parse(tsv: *const c_char, codepoint: bool, out: *mut *mut PrDataset) -> PrStatus {
    guard(|| {
        let tsv = text(tsv, "tsv")?;
        let tokenization = if codepoint { Tokenization::Codepoint } else { Tokenization::Whitespace };
        let ds = parse_dataset(tsv, &IngestOptions { tokenization })?;
        put(out, Box::into_raw(Box::new(PrDataset { inner: ds })), "out")
    })
}

/// Number of cognate sets, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_len(ds: *const PrDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// # Safety
/// `ds` must be null or a dataset handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_free(ds: *mut PrDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// A trained reconstruction model.
pub struct PrRecon {
    inner: ReconModel,
}

/// A trained reflex-prediction model.
pub struct PrReflex {
    inner: ReflexModel,
}

/// Load a reconstruction checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_recon_load(path: *const c_char, out: *mut *mut PrRecon) -> PrStatus {
    guard(|| {
        let m: ReconModel = load_checkpoint(Path::new(text(path, "path")?), None)?;
        put(out, Box::into_raw(Box::new(PrRecon { inner: m })), "out")
    })
}

/// Load a reflex checkpoint whose vocabulary must match `recon`'s.
///
/// # Safety
/// `path` must be a NUL-terminated string, `recon` a live handle and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pr_reflex_load(path: *const c_char, recon: *const PrRecon, out: *mut *mut PrReflex) -> PrStatus {
    guard(|| {
        let recon = handle(recon, "recon")?;
        let hash = recon.inner.vocabulary().hash();
        let m: ReflexModel = load_checkpoint(Path::new(text(path, "path")?), Some(&hash))?;
        put(out, Box::into_raw(Box::new(PrReflex { inner: m })), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_recon_free(m: *mut PrRecon) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_reflex_free(m: *mut PrReflex) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

struct Entry {
    tokens: CString,
    m: f64,
    r: f64,
    s: f64,
    beam_rank: usize,
}

/// A ranked list of protoform candidates.
pub struct PrCandidates {
    entries: Vec<Entry>,
}

/// Beam-search candidates for cognate set `index` of `ds`, best first.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_beam_search(
    recon: *const PrRecon,
    ds: *const PrDataset,
    index: usize,
    k: usize,
    alpha: f64,
    out: *mut *mut PrCandidates,
) -> PrStatus {
    guard(|| {
        let recon = &handle(recon, "recon")?.inner;
        let ds = &handle(ds, "dataset")?.inner;
        let set = ds
            .sets
            .get(index)
            .ok_or_else(|| Failure(PrStatus::OutOfRange, format!("set index {index} of {}", ds.len())))?;
        let input = assemble_reconstruction_input(set, &ds.languages, recon.vocabulary(), false)?;
        let beam = beam_search(recon, &input, BeamConfig { k, alpha, max_len: recon.max_len() })?;
        let v = recon.vocabulary();
        let entries = beam
            .iter()
            .enumerate()
            .map(|(i, c)| Entry {
                tokens: CString::new(v.render(&c.ids)).expect("tokens have no nul"),
                m: c.m,
                r: f64::NAN,
                s: c.m,
                beam_rank: i,
            })
            .collect();
        put(out, Box::into_raw(Box::new(PrCandidates { entries })), "out")
    })
}

/// Beam search followed by reflex-accuracy reranking, best first.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_reconstruct(
    recon: *const PrRecon,
    reflex: *const PrReflex,
    ds: *const PrDataset,
    index: usize,
    k: usize,
    alpha: f64,
    lambda: f64,
    out: *mut *mut PrCandidates,
) -> PrStatus {
    guard(|| {
        let recon = &handle(recon, "recon")?.inner;
        let reflex = &handle(reflex, "reflex")?.inner;
        let ds = &handle(ds, "dataset")?.inner;
        let set = ds
            .sets
            .get(index)
            .ok_or_else(|| Failure(PrStatus::OutOfRange, format!("set index {index} of {}", ds.len())))?;
        if !(lambda >= 0.0) {
            return Err(Failure(PrStatus::Config, format!("lambda {lambda} must be >= 0")));
        }
        let input = assemble_reconstruction_input(set, &ds.languages, recon.vocabulary(), false)?;
        let beam = beam_search(recon, &input, BeamConfig { k, alpha, max_len: recon.max_len() })?;
        let cache = PredictionCache::new();
        let o = rerank_beam(recon, reflex, beam, set, &ds.languages, lambda, &cache)?;
        let v = recon.vocabulary();
        let entries = o
            .reranked
            .iter()
            .map(|c| Entry {
                tokens: CString::new(v.render(&c.ids)).expect("tokens have no nul"),
                m: c.m,
                r: c.r,
                s: c.s,
                beam_rank: c.beam_rank,
            })
            .collect();
        put(out, Box::into_raw(Box::new(PrCandidates { entries })), "out")
    })
}

/// Number of candidates, or 0 for a null handle.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_candidates_len(c: *const PrCandidates) -> usize {
    c.as_ref().map_or(0, |c| c.entries.len())
}

/// Space-joined tokens of candidate `i`, owned by the list; null when out of
/// range.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pr_candidates_tokens(c: *const PrCandidates, i: usize) -> *const c_char {
    c.as_ref()
        .and_then(|c| c.entries.get(i))
        .map_or(ptr::null(), |e| e.tokens.as_ptr())
}

/// Scores of candidate `i`. `r` is NaN for plain beam lists, where `s`
/// equals `m`. Any output pointer may be null.
///
/// # Safety
/// `c` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_candidates_scores(
    c: *const PrCandidates,
    i: usize,
    m: *mut f64,
    r: *mut f64,
    s: *mut f64,
    beam_rank: *mut usize,
) -> PrStatus {
    guard(|| {
        let c = handle(c, "candidates")?;
        let e = c
            .entries
            .get(i)
            .ok_or_else(|| Failure(PrStatus::OutOfRange, format!("candidate {i} of {}", c.entries.len())))?;
        for (p, v) in [(m, e.m), (r, e.r), (s, e.s)] {
            if !p.is_null() {
                p.write(v);
            }
        }
        if !beam_rank.is_null() {
            beam_rank.write(e.beam_rank);
        }
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_candidates_free(c: *mut PrCandidates) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Rerank `n` candidates given their normalized log probabilities `m` and
/// reranker scores `r`: writes `s = m + λ·r` in input order to `s_out` and
/// the input index of each reranked position to `order_out`.
///
/// # Safety
/// `m` and `r` must hold `n` values; `s_out` and `order_out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn pr_rerank_scores(
    m: *const f64,
    r: *const f64,
    n: usize,
    lambda: f64,
    s_out: *mut f64,
    order_out: *mut usize,
) -> PrStatus {
    guard(|| {
        if n > 0 && (m.is_null() || r.is_null() || s_out.is_null() || order_out.is_null()) {
            return Err(null("m, r, s_out or order_out"));
        }
        if !(lambda >= 0.0) {
            return Err(Failure(PrStatus::Config, format!("lambda {lambda} must be >= 0")));
        }
        if n == 0 {
            return Ok(());
        }
        let (m, r) = (std::slice::from_raw_parts(m, n), std::slice::from_raw_parts(r, n));
        let cands: Vec<protorecon::decode::Candidate> = m
            .iter()
            .map(|&m| protorecon::decode::Candidate { ids: Vec::new(), log_prob: m, len: 1, m, finished: true })
            .collect();
        let out = rerank(&cands, r, lambda)?;
        let s_out = std::slice::from_raw_parts_mut(s_out, n);
        let order_out = std::slice::from_raw_parts_mut(order_out, n);
        for (pos, c) in out.iter().enumerate() {
            s_out[c.beam_rank] = c.s;
            order_out[pos] = c.beam_rank;
        }
        Ok(())
    })
}

/// Token edit distance between two space-separated token strings.
///
/// # Safety
/// `a` and `b` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_token_edit_distance(a: *const c_char, b: *const c_char, out: *mut usize) -> PrStatus {
    guard(|| {
        let (a, b) = (split_tokens(text(a, "a")?), split_tokens(text(b, "b")?));
        put(out, token_edit_distance(&a, &b), "out")
    })
}

/// Feature edit distance under the bundled feature table.
///
/// # Safety
/// `a` and `b` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_feature_edit_distance(a: *const c_char, b: *const c_char, out: *mut f64) -> PrStatus {
    guard(|| {
        let (a, b) = (split_tokens(text(a, "a")?), split_tokens(text(b, "b")?));
        put(out, feature_edit_distance(&a, &b, &FeatureTable::bundled())?, "out")
    })
}

/// B-Cubed F score of a prediction against a gold sequence.
///
/// # Safety
/// `pred` and `gold` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_bcubed_f(pred: *const c_char, gold: *const c_char, out: *mut f64) -> PrStatus {
    guard(|| {
        let (p, g) = (split_tokens(text(pred, "pred")?), split_tokens(text(gold, "gold")?));
        put(out, bcubed_f(&p, &g), "out")
    })
}

/// Normalized copy of a dataset as TSV; release with `pr_string_free`.
///
/// # Safety
/// `ds` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_dataset_to_tsv(ds: *const PrDataset, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        put(out, owned_string(ds.inner.to_tsv()), "out")
    })
}
