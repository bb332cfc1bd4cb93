//! C ABI over the slcode library.
//!
//! Keys are opaque handles owned by the caller and released with
//! `sl_key_free`. Every fallible function returns an `SlStatus`; on failure
//! a message is kept per thread and read back with `sl_last_error`.
//! Text crosses the boundary as Latin-1 bytes, one byte per character.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slcode::channel::ChannelModel;
use slcode::codec;
use slcode::linalg::Vector;
use slcode::lp::{LpStatus, SolverOptions};
use slcode::matgen::{self, CodeKey, MatgenError};
use slcode::pipeline;
use slcode::rproj::JllParams;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    SlOk = 0,
    SlNullPointer = 1,
    SlInvalidArgument = 2,
    SlBufferTooSmall = 3,
    SlIo = 4,
    SlCorruptKey = 5,
    SlFailed = 6,
    SlPanic = 7,
}

/// Encoder/decoder key pair.
pub struct SlKey {
    inner: CodeKey,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: impl std::fmt::Display) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string().into_bytes());
}

fn fail(status: SlStatus, msg: impl std::fmt::Display) -> SlStatus {
    set_error(msg);
    status
}

fn matgen_status(e: MatgenError) -> SlStatus {
    let status = match e {
        MatgenError::InvalidParameter(_) => SlStatus::SlInvalidArgument,
        MatgenError::CorruptKey(_) | MatgenError::InvariantViolation(_) => SlStatus::SlCorruptKey,
        MatgenError::Io(_) => SlStatus::SlIo,
        _ => SlStatus::SlFailed,
    };
    fail(status, e)
}

fn guard(f: impl FnOnce() -> SlStatus) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == SlStatus::SlOk {
                LAST_ERROR.with(|e| e.borrow_mut().clear());
            }
            s
        }
        Err(_) => fail(SlStatus::SlPanic, "internal panic"),
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len`. Returns the full message
/// length without the terminator.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

unsafe fn put_key(out: *mut *mut SlKey, key: CodeKey) {
    *out = Box::into_raw(Box::new(SlKey { inner: key }));
}

/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sl_key_generate_orthogonal(
    d: usize,
    redundancy: f64,
    seed: u64,
    out: *mut *mut SlKey,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::SlNullPointer, "out is NULL");
        }
        match matgen::generate_orthogonal_key(d, redundancy, seed) {
            Ok(k) => {
                put_key(out, k);
                SlStatus::SlOk
            }
            Err(e) => matgen_status(e),
        }
    })
}

/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sl_key_generate_impossible(
    m: usize,
    delta_prime: f64,
    seed: u64,
    out: *mut *mut SlKey,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::SlNullPointer, "out is NULL");
        }
        match matgen::generate_impossible_key(m, delta_prime, seed) {
            Ok(k) => {
                put_key(out, k);
                SlStatus::SlOk
            }
            Err(e) => matgen_status(e),
        }
    })
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, SlStatus> {
    if path.is_null() {
        return Err(fail(SlStatus::SlNullPointer, "path is NULL"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(SlStatus::SlInvalidArgument, "path is not UTF-8"))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_key_load(path: *const c_char, out: *mut *mut SlKey) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::SlNullPointer, "out is NULL");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match matgen::load_key(path) {
            Ok(k) => {
                put_key(out, k);
                SlStatus::SlOk
            }
            Err(e) => matgen_status(e),
        }
    })
}

/// # Safety
/// `key` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sl_key_save(key: *const SlKey, path: *const c_char) -> SlStatus {
    guard(|| {
        let Some(key) = key.as_ref() else {
            return fail(SlStatus::SlNullPointer, "key is NULL");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match matgen::save_key(path, &key.inner) {
            Ok(()) => SlStatus::SlOk,
            Err(e) => matgen_status(e),
        }
    })
}

/// Releases a key. NULL is ignored.
///
/// # Safety
/// `key` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_key_free(key: *mut SlKey) {
    if !key.is_null() {
        drop(Box::from_raw(key));
    }
}

/// Message bits `d`; a message is `d / 8` bytes. Zero for NULL.
///
/// # Safety
/// `key` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_key_message_bits(key: *const SlKey) -> usize {
    key.as_ref().map_or(0, |k| k.inner.message_bits())
}

/// Codeword length `n`. Zero for NULL.
///
/// # Safety
/// `key` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_key_code_length(key: *const SlKey) -> usize {
    key.as_ref().map_or(0, |k| k.inner.code_length())
}

/// Encodes exactly `message_bits / 8` Latin-1 bytes into `n` reals.
///
/// # Safety
/// `text` must hold `text_len` bytes and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_encode(
    key: *const SlKey,
    text: *const u8,
    text_len: usize,
    out: *mut f64,
    out_len: usize,
) -> SlStatus {
    guard(|| {
        let Some(key) = key.as_ref() else {
            return fail(SlStatus::SlNullPointer, "key is NULL");
        };
        if (text.is_null() && text_len > 0) || out.is_null() {
            return fail(SlStatus::SlNullPointer, "text or out is NULL");
        }
        let n = key.inner.code_length();
        if out_len < n {
            return fail(SlStatus::SlBufferTooSmall, format!("need {n} doubles, got {out_len}"));
        }
        let bytes = if text_len == 0 { &[][..] } else { std::slice::from_raw_parts(text, text_len) };
        match pipeline::encode(&key.inner, &codec::latin1_to_string(bytes)) {
            Ok(z) => {
                ptr::copy_nonoverlapping(z.as_slice().as_ptr(), out, n);
                SlStatus::SlOk
            }
            Err(e) => fail(SlStatus::SlInvalidArgument, e),
        }
    })
}

/// Adds `round(delta * len)` gross errors of magnitude at most
/// `gross_magnitude` to `z` in place.
///
/// # Safety
/// `z` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_corrupt(z: *mut f64, len: usize, delta: f64, gross_magnitude: f64, seed: u64) -> SlStatus {
    guard(|| {
        if z.is_null() && len > 0 {
            return fail(SlStatus::SlNullPointer, "z is NULL");
        }
        let mut channel = match ChannelModel::new(delta, gross_magnitude, seed) {
            Ok(c) => c,
            Err(e) => return fail(SlStatus::SlInvalidArgument, e),
        };
        if len == 0 {
            return SlStatus::SlOk;
        }
        let buf = std::slice::from_raw_parts_mut(z, len);
        let v = match Vector::new(buf.to_vec()) {
            Ok(v) => v,
            Err(e) => return fail(SlStatus::SlInvalidArgument, e),
        };
        let (zb, _) = channel.corrupt(&v);
        buf.copy_from_slice(zb.as_slice());
        SlStatus::SlOk
    })
}

/// Projection settings for `sl_decode`; `project = 0` solves the full
/// program and ignores the rest.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlProjection {
    pub project: i32,
    pub epsilon: f64,
    pub alpha: f64,
    pub jll_constant: f64,
    pub seed: u64,
}

/// Default projection settings, with projection switched off.
#[no_mangle]
pub extern "C" fn sl_projection_default() -> SlProjection {
    let p = JllParams::default();
    SlProjection {
        project: 0,
        epsilon: p.epsilon,
        alpha: p.alpha,
        jll_constant: p.jll_constant,
        seed: 0,
    }
}

/// Decodes `n` received reals into `message_bits / 8` Latin-1 bytes.
/// A non-optimal LP still yields text and returns `SL_FAILED`.
///
/// # Safety
/// `z_bar` must hold `len` doubles, `out` `out_len` bytes; `projection`
/// may be NULL for the full program.
#[no_mangle]
pub unsafe extern "C" fn sl_decode(
    key: *const SlKey,
    z_bar: *const f64,
    len: usize,
    projection: *const SlProjection,
    out: *mut u8,
    out_len: usize,
) -> SlStatus {
    guard(|| {
        let Some(key) = key.as_ref() else {
            return fail(SlStatus::SlNullPointer, "key is NULL");
        };
        if z_bar.is_null() || out.is_null() {
            return fail(SlStatus::SlNullPointer, "z_bar or out is NULL");
        }
        let chars = key.inner.message_bits() / 8;
        if out_len < chars {
            return fail(SlStatus::SlBufferTooSmall, format!("need {chars} bytes, got {out_len}"));
        }
        let z = match Vector::new(std::slice::from_raw_parts(z_bar, len).to_vec()) {
            Ok(v) => v,
            Err(e) => return fail(SlStatus::SlInvalidArgument, e),
        };
        let projector = match projection.as_ref() {
            Some(p) if p.project != 0 => {
                let params = JllParams {
                    epsilon: p.epsilon,
                    alpha: p.alpha,
                    jll_constant: p.jll_constant,
                };
                match pipeline::projector_for_key(&key.inner, &params, p.seed) {
                    Ok(t) => Some(t),
                    Err(e) => return fail(SlStatus::SlInvalidArgument, e),
                }
            }
            _ => None,
        };
        let report = match pipeline::decode(&key.inner, &z, projector.as_ref(), &SolverOptions::default()) {
            Ok(r) => r,
            Err(e) => return fail(SlStatus::SlInvalidArgument, e),
        };
        // decoded characters are always Latin-1
        let bytes = codec::string_to_latin1(&report.decoded_text).unwrap_or_default();
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len().min(chars));
        if report.lp_status != LpStatus::Optimal {
            return fail(SlStatus::SlFailed, format!("LP ended with status {}", report.lp_status));
        }
        SlStatus::SlOk
    })
}
