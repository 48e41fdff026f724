//! C ABI over the `evpred` toolkit.
//!
//! Every fallible function returns an [`EvpredStatus`]; on failure a message
//! is available from [`evpred_last_error`] on the same thread. Strings
//! returned through out-parameters are owned by the caller and must be
//! released with [`evpred_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use evpred::corpus::{tokenize, Vocabulary};
use evpred::eval::bleu_corpus;
use evpred::seq2seq::Seq2SeqModel;
use evpred::Error;

/// Status codes. Non-zero values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvpredStatus {
    Ok = 0,
    /// Bad argument, null pointer, malformed file, I/O or shape error.
    InvalidArgument = 2,
    /// Checkpoint or vocabulary failed an integrity check.
    Integrity = 3,
    /// Model failure (invalid model, divergence, failed check).
    ModelError = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Opaque handle to a loaded model and its vocabulary.
pub struct EvpredModel {
    model: Seq2SeqModel,
    vocab: Vocabulary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EvpredStatus {
    match e.exit_code() {
        3 => EvpredStatus::Integrity,
        4 => EvpredStatus::ModelError,
        _ => EvpredStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Error>>(f: F) -> EvpredStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EvpredStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            EvpredStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(Error::invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::invalid(format!("{what} is not UTF-8")))
}

fn to_c_string(s: String) -> Result<*mut c_char, Error> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Error::invalid("output contains a NUL byte"))
}

/// Loads a checkpoint and the vocabulary it was trained with.
///
/// # Safety
/// `checkpoint_path` and `vocab_path` must be NUL-terminated strings and
/// `out` a valid pointer. On success `*out` owns a handle to be released
/// with `evpred_model_free`.
#[no_mangle]
pub unsafe extern "C" fn evpred_model_load(
    checkpoint_path: *const c_char,
    vocab_path: *const c_char,
    out: *mut *mut EvpredModel,
) -> EvpredStatus {
    guard(|| {
        if out.is_null() {
            return Err(Error::invalid("out is null"));
        }
        *out = ptr::null_mut();
        let ckpt = str_arg(checkpoint_path, "checkpoint_path")?;
        let vocab = str_arg(vocab_path, "vocab_path")?;
        let (model, vocab) = evpred::cli::load_model(Path::new(ckpt), Path::new(vocab))?;
        *out = Box::into_raw(Box::new(EvpredModel { model, vocab }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from `evpred_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evpred_model_free(model: *mut EvpredModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of vocabulary entries (including reserved tokens), or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evpred_model_vocab_size(model: *const EvpredModel) -> usize {
    model.as_ref().map_or(0, |m| m.vocab.len())
}

/// Greedy-decodes one source sentence into a space-joined prediction.
///
/// # Safety
/// `model` must be a live handle, `source` a NUL-terminated string and
/// `out` a valid pointer. On success `*out` must be released with
/// `evpred_string_free`. The model may be shared across threads.
#[no_mangle]
pub unsafe extern "C" fn evpred_model_predict(
    model: *const EvpredModel,
    source: *const c_char,
    out: *mut *mut c_char,
) -> EvpredStatus {
    guard(|| {
        if out.is_null() {
            return Err(Error::invalid("out is null"));
        }
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| Error::invalid("model is null"))?;
        let text = str_arg(source, "source")?;
        let ids = m.vocab.encode(&tokenize(text));
        let predicted = m.vocab.decode(&m.model.greedy_decode(&ids)?).join(" ");
        *out = to_c_string(predicted)?;
        Ok(())
    })
}

/// Corpus BLEU-4 of `n` candidate sentences against one reference each.
/// Sentences are normalized and split on whitespace.
///
/// # Safety
/// `candidates` and `references` must point to `n` NUL-terminated strings
/// each (they may be null when `n` is 0); `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn evpred_bleu(
    candidates: *const *const c_char,
    references: *const *const c_char,
    n: usize,
    out: *mut f64,
) -> EvpredStatus {
    guard(|| {
        if out.is_null() {
            return Err(Error::invalid("out is null"));
        }
        if n > 0 && (candidates.is_null() || references.is_null()) {
            return Err(Error::invalid("sentence arrays are null"));
        }
        let mut cands = Vec::with_capacity(n);
        let mut refs = Vec::with_capacity(n);
        for i in 0..n {
            cands.push(tokenize(str_arg(*candidates.add(i), "candidate")?));
            refs.push(tokenize(str_arg(*references.add(i), "reference")?));
        }
        *out = bleu_corpus(&cands, &refs)?.bleu;
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evpred_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn evpred_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn evpred_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
