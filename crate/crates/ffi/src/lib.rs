//! C interface to the coversumm engine.
//!
//! Every function returns a [`CsStatus`]. On failure the message is kept in a
//! thread-local slot readable through [`cs_last_error`]. Engines are opaque
//! handles created by [`cs_engine_new`] and released with [`cs_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use coversumm::{CoverSumm, CoverSummError, EngineConfig, Point, Summarizer, Summary, Variant};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    DuplicateId = 4,
    NotFound = 5,
    BufferTooSmall = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsVariant {
    Reservoir = 0,
    KnnPlusRange = 1,
    LazyReservoir = 2,
}

/// Engine parameters. Start from [`cs_config_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CsConfig {
    pub k: usize,
    pub alpha: f64,
    pub c_max: usize,
    pub gamma: f64,
    pub variant: CsVariant,
}

/// Opaque engine handle.
pub struct CsEngine {
    inner: CoverSumm,
    last: Summary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CsStatus, msg: impl Into<String>) -> CsStatus {
    set_error(msg.into());
    status
}

fn from_error(e: CoverSummError) -> CsStatus {
    let status = match e {
        CoverSummError::DimensionMismatch { .. } => CsStatus::DimensionMismatch,
        CoverSummError::DuplicateId { .. } => CsStatus::DuplicateId,
        CoverSummError::NotFound(_) => CsStatus::NotFound,
        CoverSummError::InvalidInput(_) | CoverSummError::EmptyIndex => CsStatus::InvalidArgument,
        _ => CsStatus::Internal,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CsStatus) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CsStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(CsStatus::Panic, "panic inside coversumm"),
    }
}

/// Message describing the most recent failure on this thread, or NULL. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cs_config_default() -> CsConfig {
    let c = EngineConfig::default();
    CsConfig { k: c.k, alpha: c.alpha, c_max: c.c_max, gamma: c.gamma, variant: CsVariant::LazyReservoir }
}

fn engine_config(c: &CsConfig) -> EngineConfig {
    let variant = match c.variant {
        CsVariant::Reservoir => Variant::Reservoir,
        CsVariant::KnnPlusRange => Variant::KnnPlusRange,
        CsVariant::LazyReservoir => Variant::LazyReservoir,
    };
    EngineConfig { k: c.k, alpha: c.alpha, c_max: c.c_max, gamma: c.gamma, ..EngineConfig::with_k(c.k) }
        .variant(variant)
}

/// Creates an engine for `dim`-dimensional points. `config` may be NULL for
/// defaults. On success `*out` receives the handle.
///
/// # Safety
/// `config` must be NULL or point to a valid `CsConfig`; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_new(dim: usize, config: *const CsConfig, out: *mut *mut CsEngine) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return fail(CsStatus::NullPointer, "out is NULL");
        }
        let cfg = if config.is_null() { cs_config_default() } else { *config };
        if dim == 0 {
            return fail(CsStatus::InvalidArgument, "dim must be at least 1");
        }
        match CoverSumm::new(dim, engine_config(&cfg)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CsEngine { inner, last: Summary::empty(0, false) }));
                CsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases an engine. NULL is ignored.
///
/// # Safety
/// `engine` must be NULL or a handle from `cs_engine_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_free(engine: *mut CsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Feeds one point. Ids must be strictly increasing. `did_search` may be NULL;
/// otherwise it receives whether the step queried the index.
///
/// # Safety
/// `engine` must be a live handle; `vec` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_step(
    engine: *mut CsEngine,
    id: u64,
    vec: *const f64,
    len: usize,
    did_search: *mut bool,
) -> CsStatus {
    guard(|| {
        let Some(e) = engine.as_mut() else {
            return fail(CsStatus::NullPointer, "engine is NULL");
        };
        if vec.is_null() && len > 0 {
            return fail(CsStatus::NullPointer, "vec is NULL");
        }
        let v = if len == 0 { Vec::new() } else { slice::from_raw_parts(vec, len).to_vec() };
        match e.inner.step(&Point::new(id, v)) {
            Ok(r) => {
                if !did_search.is_null() {
                    *did_search = r.did_reservoir_search;
                }
                e.last = r.summary;
                CsStatus::Ok
            }
            Err(err) => from_error(err),
        }
    })
}

/// Deletes `n` points by id as one batch.
///
/// # Safety
/// `engine` must be a live handle; `ids` must point to `n` ids.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_delete(engine: *mut CsEngine, ids: *const u64, n: usize) -> CsStatus {
    guard(|| {
        let Some(e) = engine.as_mut() else {
            return fail(CsStatus::NullPointer, "engine is NULL");
        };
        if n == 0 {
            return CsStatus::Ok;
        }
        if ids.is_null() {
            return fail(CsStatus::NullPointer, "ids is NULL");
        }
        match e.inner.delete_batch(slice::from_raw_parts(ids, n)) {
            Ok(s) => {
                e.last = s;
                CsStatus::Ok
            }
            Err(err) => from_error(err),
        }
    })
}

/// Copies the current summary, nearest first. `*written` always receives the
/// summary length; if `capacity` is smaller nothing is copied and
/// `BUFFER_TOO_SMALL` is returned. `distances` may be NULL.
///
/// # Safety
/// `engine` must be a live handle; `ids` (and `distances` when non-NULL) must
/// have room for `capacity` elements; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_summary(
    engine: *const CsEngine,
    ids: *mut u64,
    distances: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> CsStatus {
    guard(|| {
        let Some(e) = engine.as_ref() else {
            return fail(CsStatus::NullPointer, "engine is NULL");
        };
        if written.is_null() {
            return fail(CsStatus::NullPointer, "written is NULL");
        }
        let n = e.last.member_ids.len();
        *written = n;
        if n > capacity {
            return fail(CsStatus::BufferTooSmall, format!("summary holds {n} ids, buffer {capacity}"));
        }
        if n == 0 {
            return CsStatus::Ok;
        }
        if ids.is_null() {
            return fail(CsStatus::NullPointer, "ids is NULL");
        }
        ptr::copy_nonoverlapping(e.last.member_ids.as_ptr(), ids, n);
        if !distances.is_null() {
            ptr::copy_nonoverlapping(e.last.distances.as_ptr(), distances, n);
        }
        CsStatus::Ok
    })
}

/// Number of index queries issued so far, or 0 for NULL.
///
/// # Safety
/// `engine` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_reservoir_searches(engine: *const CsEngine) -> u64 {
    engine.as_ref().map_or(0, |e| e.inner.reservoir_searches())
}

/// Number of live points, or 0 for NULL.
///
/// # Safety
/// `engine` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_engine_len(engine: *const CsEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.inner.live_points())
}
