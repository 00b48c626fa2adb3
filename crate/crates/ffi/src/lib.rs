//! C ABI for the tsvd topic-recovery library.
//!
//! Conventions: opaque handles behind pointers, status codes for every
//! fallible call, a thread-local last-error message, and `*_free`
//! functions for everything this library allocates. The generated header
//! lives at `include/tsvd.h`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use libc::{c_char, size_t};

use tsvd::corpus::Corpus;
use tsvd::synth::TopicMatrix;
use tsvd::tsvd::{run_tsvd, CutoffMode, FloorMode, TsvdConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsvdStatus {
    TsvdOk = 0,
    /// A required pointer argument was null.
    TsvdNullArgument = 1,
    /// A string argument was not valid UTF-8.
    TsvdInvalidUtf8 = 2,
    /// File could not be read or written.
    TsvdIo = 3,
    /// Input file was malformed.
    TsvdParse = 4,
    /// Invalid parameter combination.
    TsvdConfig = 5,
    /// The algorithm failed (degenerate geometry, recovery failure, ...).
    TsvdAlgorithm = 6,
    /// An index or buffer size was out of range.
    TsvdOutOfRange = 7,
    /// An internal panic was caught; state may be stale but memory is safe.
    TsvdPanic = 8,
}

/// Opaque corpus handle.
pub struct TsvdCorpus {
    inner: Corpus,
}

/// Opaque model handle.
pub struct TsvdModel {
    inner: tsvd::tsvd::TsvdModel,
}

/// Algorithm parameters, plain-old-data so callers can fill them directly.
/// Use `tsvd_params_default` and override what you need.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TsvdParams {
    /// Number of topics (at least 1).
    pub k: u32,
    /// Minimum dominant-topic probability; values <= 0 mean 1/k.
    pub w0: f64,
    pub epsilon: f64,
    pub epsilon0: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Count grid resolution; 0 means the corpus's median document length.
    pub nominal_m: u64,
    /// 0 = off, 1 = formula floor, 2 = explicit (`floor_value`).
    pub floor_mode: i32,
    pub floor_value: f64,
    /// 0 = off, 1 = formula cutoff, 2 = explicit (`cutoff_value`).
    pub cutoff_mode: i32,
    pub cutoff_value: f64,
    pub kmeans_restarts: u32,
    pub lloyd_max_iters: u32,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// NUL-terminated library version; the pointer is static, do not free it.
#[no_mangle]
pub extern "C" fn tsvd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The error message of the most recent failing call on this thread, or
/// null. The caller owns the returned string: free it with
/// `tsvd_string_free`.
#[no_mangle]
pub extern "C" fn tsvd_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be a pointer previously returned by `tsvd_last_error_message`
/// and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsvd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default parameters for `k` topics: w0 = 1/k, epsilon = 1/6,
/// epsilon0 = 1/3, delta = 0.05, gamma = 1.1, floor and cutoff off,
/// 10 restarts, seed 0.
#[no_mangle]
pub extern "C" fn tsvd_params_default(k: u32) -> TsvdParams {
    TsvdParams {
        k,
        w0: if k > 0 { 1.0 / k as f64 } else { 0.0 },
        epsilon: 1.0 / 6.0,
        epsilon0: 1.0 / 3.0,
        delta: 0.05,
        gamma: 1.1,
        nominal_m: 0,
        floor_mode: 0,
        floor_value: 0.0,
        cutoff_mode: 0,
        cutoff_value: 0.0,
        kmeans_restarts: 10,
        lloyd_max_iters: 100,
        seed: 0,
    }
}

unsafe fn cstr_to_path<'a>(ptr: *const c_char) -> Result<&'a Path, TsvdStatus> {
    if ptr.is_null() {
        set_error("null path".into());
        return Err(TsvdStatus::TsvdNullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            Err(TsvdStatus::TsvdInvalidUtf8)
        }
    }
}

fn guard<F: FnOnce() -> TsvdStatus>(f: F) -> TsvdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            TsvdStatus::TsvdPanic
        }
    }
}

/// Reads a corpus in UCI bag-of-words format. On success `*out` owns the
/// corpus; release it with `tsvd_corpus_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tsvd_corpus_read_uci(
    path: *const c_char,
    out: *mut *mut TsvdCorpus,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if out.is_null() {
            set_error("null output pointer".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let path = match cstr_to_path(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) => {
                set_error(format!("cannot open {}: {e}", path.display()));
                return TsvdStatus::TsvdIo;
            }
        };
        match Corpus::parse_uci_bag_of_words(BufReader::new(file), None::<BufReader<File>>) {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(TsvdCorpus { inner: corpus }));
                TsvdStatus::TsvdOk
            }
            Err(e) => {
                set_error(e.to_string());
                TsvdStatus::TsvdParse
            }
        }
    })
}

/// Number of documents, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn tsvd_corpus_num_docs(corpus: *const TsvdCorpus) -> u64 {
    if corpus.is_null() {
        return 0;
    }
    (*corpus).inner.num_docs() as u64
}

/// Vocabulary size, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn tsvd_corpus_num_words(corpus: *const TsvdCorpus) -> u64 {
    if corpus.is_null() {
        return 0;
    }
    (*corpus).inner.num_words() as u64
}

/// Frees a corpus handle. Null is a no-op.
///
/// # Safety
/// `corpus` must be a pointer from `tsvd_corpus_read_uci`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsvd_corpus_free(corpus: *mut TsvdCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

fn params_to_config(p: &TsvdParams) -> Result<TsvdConfig, String> {
    if p.k == 0 {
        return Err("k must be at least 1".into());
    }
    let mut config = TsvdConfig::new(p.k as usize);
    if p.w0 > 0.0 {
        config.w0 = p.w0;
    }
    config.epsilon = p.epsilon;
    config.epsilon0 = p.epsilon0;
    config.delta = p.delta;
    config.gamma = p.gamma;
    config.nominal_m = if p.nominal_m == 0 {
        None
    } else {
        Some(p.nominal_m as usize)
    };
    config.threshold_floor_mode = match p.floor_mode {
        0 => FloorMode::Off,
        1 => FloorMode::PaperFormula,
        2 => FloorMode::Explicit(p.floor_value),
        other => return Err(format!("floor_mode {other} not in 0..=2")),
    };
    config.catchword_cutoff_mode = match p.cutoff_mode {
        0 => CutoffMode::Off,
        1 => CutoffMode::PaperFormula,
        2 => CutoffMode::Explicit(p.cutoff_value),
        other => return Err(format!("cutoff_mode {other} not in 0..=2")),
    };
    config.kmeans_restarts = p.kmeans_restarts as usize;
    config.lloyd_max_iters = p.lloyd_max_iters as usize;
    config.seed = p.seed;
    Ok(config)
}

/// Runs topic recovery. On success `*out` owns the model; release it with
/// `tsvd_model_free`.
///
/// # Safety
/// All pointers must be valid; `corpus` must be a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn tsvd_run(
    corpus: *const TsvdCorpus,
    params: *const TsvdParams,
    out: *mut *mut TsvdModel,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if corpus.is_null() || params.is_null() || out.is_null() {
            set_error("null argument".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let config = match params_to_config(&*params) {
            Ok(c) => c,
            Err(msg) => {
                set_error(msg);
                return TsvdStatus::TsvdConfig;
            }
        };
        match run_tsvd(&(*corpus).inner, &config) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(TsvdModel { inner: model }));
                TsvdStatus::TsvdOk
            }
            Err(e) => {
                let status = match &e {
                    tsvd::tsvd::TsvdError::Config(_) => TsvdStatus::TsvdConfig,
                    _ => TsvdStatus::TsvdAlgorithm,
                };
                set_error(e.to_string());
                status
            }
        }
    })
}

/// Number of topics in the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_num_topics(model: *const TsvdModel) -> u64 {
    if model.is_null() {
        return 0;
    }
    (*model).inner.m_hat.num_topics() as u64
}

/// Vocabulary size of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_num_words(model: *const TsvdModel) -> u64 {
    if model.is_null() {
        return 0;
    }
    (*model).inner.m_hat.num_words() as u64
}

/// Copies the recovered d×k topic matrix into `buffer` in column-major
/// order. `len` must be exactly d·k.
///
/// # Safety
/// `buffer` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_topic_matrix(
    model: *const TsvdModel,
    buffer: *mut f64,
    len: size_t,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if model.is_null() || buffer.is_null() {
            set_error("null argument".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let m_hat = &(*model).inner.m_hat;
        let needed = m_hat.num_words() * m_hat.num_topics();
        if len != needed {
            set_error(format!("buffer has {len} entries, need {needed}"));
            return TsvdStatus::TsvdOutOfRange;
        }
        let slice = std::slice::from_raw_parts_mut(buffer, len);
        for l in 0..m_hat.num_topics() {
            let col = m_hat.column(l);
            let dst = &mut slice[l * m_hat.num_words()..(l + 1) * m_hat.num_words()];
            dst.copy_from_slice(col);
        }
        TsvdStatus::TsvdOk
    })
}

/// Number of catchwords identified for `topic`, written to `*out`.
///
/// # Safety
/// `model` must be a live model handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_catchword_count(
    model: *const TsvdModel,
    topic: u32,
    out: *mut size_t,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if model.is_null() || out.is_null() {
            set_error("null argument".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let sets = &(*model).inner.catchwords;
        match sets.get(topic as usize) {
            Some(set) => {
                *out = set.len();
                TsvdStatus::TsvdOk
            }
            None => {
                set_error(format!("topic {topic} out of range (k={})", sets.len()));
                TsvdStatus::TsvdOutOfRange
            }
        }
    })
}

/// Copies `topic`'s catchword ids into `buffer`; `len` must be exactly the
/// value reported by `tsvd_model_catchword_count`.
///
/// # Safety
/// `buffer` must point to at least `len` writable u32 values.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_catchwords(
    model: *const TsvdModel,
    topic: u32,
    buffer: *mut u32,
    len: size_t,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if model.is_null() || buffer.is_null() {
            set_error("null argument".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let sets = &(*model).inner.catchwords;
        let Some(set) = sets.get(topic as usize) else {
            set_error(format!("topic {topic} out of range (k={})", sets.len()));
            return TsvdStatus::TsvdOutOfRange;
        };
        if len != set.len() {
            set_error(format!("buffer has {len} entries, need {}", set.len()));
            return TsvdStatus::TsvdOutOfRange;
        }
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(set);
        TsvdStatus::TsvdOk
    })
}

/// Writes the recovered topic matrix as TSV and/or the model sidecar as
/// JSON. Either path may be null to skip that file.
///
/// # Safety
/// Non-null paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_save(
    model: *const TsvdModel,
    topics_path: *const c_char,
    sidecar_path: *const c_char,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if model.is_null() {
            set_error("null model".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let inner = &(*model).inner;
        if !topics_path.is_null() {
            let path = match cstr_to_path(topics_path) {
                Ok(p) => p,
                Err(status) => return status,
            };
            let file = match File::create(path) {
                Ok(f) => f,
                Err(e) => {
                    set_error(format!("cannot create {}: {e}", path.display()));
                    return TsvdStatus::TsvdIo;
                }
            };
            if let Err(e) = inner.m_hat.write_tsv(BufWriter::new(file)) {
                set_error(e.to_string());
                return TsvdStatus::TsvdIo;
            }
        }
        if !sidecar_path.is_null() {
            let path = match cstr_to_path(sidecar_path) {
                Ok(p) => p,
                Err(status) => return status,
            };
            let file = match File::create(path) {
                Ok(f) => f,
                Err(e) => {
                    set_error(format!("cannot create {}: {e}", path.display()));
                    return TsvdStatus::TsvdIo;
                }
            };
            if let Err(e) = inner.write_sidecar_json(BufWriter::new(file)) {
                set_error(e.to_string());
                return TsvdStatus::TsvdIo;
            }
        }
        TsvdStatus::TsvdOk
    })
}

/// Frees a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer from `tsvd_run`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsvd_model_free(model: *mut TsvdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Matched L1 reconstruction error between two topic-matrix TSV files,
/// written to `*out`.
///
/// # Safety
/// Paths must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tsvd_reconstruction_error(
    reference_path: *const c_char,
    recovered_path: *const c_char,
    out: *mut f64,
) -> TsvdStatus {
    guard(|| {
        clear_error();
        if out.is_null() {
            set_error("null output pointer".into());
            return TsvdStatus::TsvdNullArgument;
        }
        let load = |ptr: *const c_char| -> Result<TopicMatrix, TsvdStatus> {
            let path = cstr_to_path(ptr)?;
            let file = File::open(path).map_err(|e| {
                set_error(format!("cannot open {}: {e}", path.display()));
                TsvdStatus::TsvdIo
            })?;
            TopicMatrix::read_tsv(BufReader::new(file)).map_err(|e| {
                set_error(e.to_string());
                TsvdStatus::TsvdParse
            })
        };
        let reference = match load(reference_path) {
            Ok(m) => m,
            Err(s) => return s,
        };
        let recovered = match load(recovered_path) {
            Ok(m) => m,
            Err(s) => return s,
        };
        match tsvd::eval::reconstruction_error(&reference, &recovered) {
            Ok(delta) => {
                *out = delta;
                TsvdStatus::TsvdOk
            }
            Err(e) => {
                set_error(e.to_string());
                TsvdStatus::TsvdConfig
            }
        }
    })
}
