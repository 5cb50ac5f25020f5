//! C ABI over `predsearch`.
//!
//! Structures live behind an opaque `PredHandle`. Every fallible call returns
//! a `PredStatus`; on failure the message is available from
//! `pred_last_error` on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use predsearch::tradeoff::{branches, TradeoffParams};
use predsearch::{build, persist, BuildConfig, BuiltStructure, Error, KeySet, Pred};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredStatus {
    Ok = 0,
    NullPointer = 1,
    Param = 2,
    Ingest = 3,
    Budget = 4,
    Build = 5,
    Invariant = 6,
    Integrity = 7,
    Io = 8,
    Panic = 9,
}

/// Build parameters. `branch` 0 picks the trade-off optimum.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PredConfig {
    pub key_bits: u32,
    pub word_bits: u32,
    pub space: u64,
    pub branch: u8,
    pub amplify: bool,
    pub seed: u64,
}

/// Answer to one query. `key` is meaningful only when `found`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PredAnswer {
    pub found: bool,
    pub key: u64,
    pub probes: u32,
    pub depth: u32,
}

/// Branch values of the trade-off formula, as doubles.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PredTradeoff {
    pub a: u32,
    pub values: [f64; 4],
    pub min: f64,
    pub argmin: u8,
}

/// Opaque built structure.
pub struct PredHandle {
    inner: BuiltStructure,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PredStatus {
    match e {
        Error::Param(_) => PredStatus::Param,
        Error::Ingest { .. } => PredStatus::Ingest,
        Error::Budget { .. } => PredStatus::Budget,
        Error::Build(_) => PredStatus::Build,
        Error::Invariant(_) => PredStatus::Invariant,
        Error::Integrity(_) => PredStatus::Integrity,
        Error::Io(_) => PredStatus::Io,
    }
}

fn fail(status: PredStatus, msg: impl Into<String>) -> PredStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), PredStatus>) -> PredStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PredStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PredStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check(r: predsearch::Result<()>) -> Result<(), PredStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn lift<T>(r: predsearch::Result<T>) -> Result<T, PredStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), PredStatus> {
    if p.is_null() {
        Err(fail(PredStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, PredStatus> {
    non_null(path, "path")?;
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(PredStatus::Param, "path is not valid UTF-8"))?;
    Ok(Path::new(s))
}

/// Configuration with the trade-off optimum, amplification on, and seed 0.
#[no_mangle]
pub extern "C" fn pred_config_default(key_bits: u32, word_bits: u32, space: u64) -> PredConfig {
    PredConfig {
        key_bits,
        word_bits,
        space,
        branch: 0,
        amplify: true,
        seed: 0,
    }
}

/// Builds a structure over `n` strictly ascending keys.
///
/// # Safety
/// `keys` must point to `n` readable `uint64_t` values (or be null when `n`
/// is 0), `cfg` to a valid `PredConfig`, and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pred_build(
    keys: *const u64,
    n: usize,
    cfg: *const PredConfig,
    out: *mut *mut PredHandle,
) -> PredStatus {
    guard(|| {
        non_null(cfg, "cfg")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let keys = if n == 0 {
            Vec::new()
        } else {
            non_null(keys, "keys")?;
            std::slice::from_raw_parts(keys, n).to_vec()
        };
        let c = &*cfg;
        let mut config = BuildConfig::new(c.key_bits, c.word_bits, c.space)
            .with_amplify(c.amplify)
            .with_seed(c.seed);
        if c.branch != 0 {
            config = config.with_branch(c.branch);
        }
        let set = lift(KeySet::new(keys, c.key_bits))?;
        let inner = lift(build(&set, &config))?;
        *out = Box::into_raw(Box::new(PredHandle { inner }));
        Ok(())
    })
}

/// Predecessor of `x`.
///
/// # Safety
/// `h` must come from `pred_build` or `pred_load` and not be freed; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pred_query(h: *const PredHandle, x: u64, out: *mut PredAnswer) -> PredStatus {
    guard(|| {
        non_null(h, "handle")?;
        non_null(out, "out")?;
        let s = &(*h).inner;
        let bits = s.config.key_bits;
        if bits < 64 && x >> bits != 0 {
            return Err(fail(PredStatus::Param, format!("query {x} exceeds {bits} bits")));
        }
        let (p, st) = s.query(x);
        *out = PredAnswer {
            found: !p.is_neg_inf(),
            key: match p {
                Pred::Key(k) => k,
                Pred::NegInf => 0,
            },
            probes: st.probes,
            depth: st.depth,
        };
        Ok(())
    })
}

/// Writes the structure to `path`.
///
/// # Safety
/// `h` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pred_save(h: *const PredHandle, path: *const c_char) -> PredStatus {
    guard(|| {
        non_null(h, "handle")?;
        let path = path_arg(path)?;
        check(persist::save(&(*h).inner, path))
    })
}

/// Loads a structure written by `pred_save` or the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pred_load(path: *const c_char, out: *mut *mut PredHandle) -> PredStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let inner = lift(persist::load(path))?;
        *out = Box::into_raw(Box::new(PredHandle { inner }));
        Ok(())
    })
}

/// Bits occupied by the structure, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pred_bits_used(h: *const PredHandle) -> u64 {
    if h.is_null() {
        0
    } else {
        (*h).inner.bits_used()
    }
}

/// Branch the structure was built with (1..=4), or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pred_branch(h: *const PredHandle) -> u8 {
    if h.is_null() {
        0
    } else {
        (*h).inner.plan.branch
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pred_free(h: *mut PredHandle) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Evaluates the four trade-off branches.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pred_tradeoff(
    n: u64,
    key_bits: u64,
    word_bits: u64,
    space: u64,
    out: *mut PredTradeoff,
) -> PredStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = lift(TradeoffParams::new(n, key_bits, word_bits, space))?;
        let b = branches(&p);
        let (min, argmin) = b.optimal();
        *out = PredTradeoff {
            a: b.a,
            values: b.values.map(|v| v.as_f64()),
            min: min.as_f64(),
            argmin,
        };
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pred_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
