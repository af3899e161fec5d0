//! C interface to `phi4-core`.
//!
//! Sequences and iteration traces are opaque handles released with their
//! `_free` function. Every fallible call returns a [`Phi4Status`]; the message
//! of the last failure on the calling thread is available through
//! [`phi4_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phi4_core::dynamics::{
    iterate_from, IterateSettings, IterationStatus, IterationTrace, PadPolicy, Setup, StartLabel,
};
use phi4_core::sequences::{build_h0, build_h_max, build_h_min, delta_max, delta_min, GreenSequence, ModelParams};
use phi4_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi4Status {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Usage = 3,
    PaddingRequired = 4,
    Singular = 5,
    Io = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi4Start {
    Max = 0,
    Min = 1,
    H0 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi4Pad {
    Fundamental = 0,
    Envelope = 1,
    Zero = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi4RunStatus {
    Converged = 0,
    Running = 1,
    Diverged = 2,
    Singular = 3,
}

/// Opaque Green's function sequence.
pub struct Phi4Sequence(GreenSequence);

/// Opaque iteration trace.
pub struct Phi4Trace(IterationTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> Phi4Status {
    match e {
        Error::Domain(_) => Phi4Status::Domain,
        Error::Usage(_) => Phi4Status::Usage,
        Error::PaddingRequired { .. } => Phi4Status::PaddingRequired,
        Error::Singular { .. } => Phi4Status::Singular,
        Error::Io { .. } => Phi4Status::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (Phi4Status, String)>) -> Phi4Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Phi4Status::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside phi4".into());
            Phi4Status::Panic
        }
    }
}

fn core_err(e: Error) -> (Phi4Status, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (Phi4Status, String) {
    (Phi4Status::NullPointer, format!("{what} is null"))
}

fn start_label(s: Phi4Start) -> StartLabel {
    match s {
        Phi4Start::Max => StartLabel::Max,
        Phi4Start::Min => StartLabel::Min,
        Phi4Start::H0 => StartLabel::H0,
    }
}

fn pad_policy(p: Phi4Pad) -> PadPolicy {
    match p {
        Phi4Pad::Fundamental => PadPolicy::Fundamental,
        Phi4Pad::Envelope => PadPolicy::Envelope,
        Phi4Pad::Zero => PadPolicy::Zero,
    }
}

/// Length in bytes of the last error message, including the trailing NUL; 0 if none.
#[no_mangle]
pub extern "C" fn phi4_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes_with_nul().len()))
}

/// Copies the last error message (NUL-terminated) into `buf`.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn phi4_last_error_message(buf: *mut c_char, len: usize) -> Phi4Status {
    if buf.is_null() {
        return Phi4Status::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[0u8][..], |c| c.as_bytes_with_nul());
        if bytes.len() > len {
            return Phi4Status::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        Phi4Status::Ok
    })
}

/// `delta_{n,max}(lambda)` for odd `n >= 3`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn phi4_delta_max(n: usize, lambda: f64, d0: f64, out: *mut f64) -> Phi4Status {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = delta_max(n, lambda, d0).map_err(core_err)?;
        Ok(())
    })
}

/// `delta_{n,min}(lambda)` for odd `n >= 3`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn phi4_delta_min(n: usize, lambda: f64, out: *mut f64) -> Phi4Status {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = delta_min(n, lambda).map_err(core_err)?;
        Ok(())
    })
}

/// Builds `H_max`, `H_min` or `H_0` on the odd grid `1..=n_work`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn phi4_sequence_build(
    start: Phi4Start,
    lambda: f64,
    n_work: usize,
    d0: f64,
    include_j2_zero: bool,
    out: *mut *mut Phi4Sequence,
) -> Phi4Status {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let params = ModelParams { d0, include_j2_zero };
        let seq = match start {
            Phi4Start::Max => build_h_max(lambda, n_work, d0),
            Phi4Start::Min => build_h_min(lambda, n_work),
            Phi4Start::H0 => build_h0(lambda, n_work, &params),
        }
        .map_err(core_err)?;
        *out = Box::into_raw(Box::new(Phi4Sequence(seq)));
        Ok(())
    })
}

/// # Safety
/// `seq` must come from `phi4_sequence_build` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn phi4_sequence_free(seq: *mut Phi4Sequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Number of stored entries (`(n_work + 1) / 2`), 0 for null.
///
/// # Safety
/// `seq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn phi4_sequence_len(seq: *const Phi4Sequence) -> usize {
    seq.as_ref().map_or(0, |s| s.0.len())
}

/// Entry `H^{n+1}` as a sign (-1, 0, 1) and the natural log of its magnitude.
///
/// # Safety
/// `seq` must be a live handle; `sign` and `ln_abs` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn phi4_sequence_get(
    seq: *const Phi4Sequence,
    n: usize,
    sign: *mut i8,
    ln_abs: *mut f64,
) -> Phi4Status {
    guard(|| {
        let seq = seq.as_ref().ok_or_else(|| null("seq"))?;
        let sign = sign.as_mut().ok_or_else(|| null("sign"))?;
        let ln_abs = ln_abs.as_mut().ok_or_else(|| null("ln_abs"))?;
        let v = seq
            .0
            .get(n)
            .ok_or_else(|| (Phi4Status::OutOfRange, format!("no entry at n = {n}")))?;
        *sign = v.sign().as_i8();
        *ln_abs = v.ln_abs();
        Ok(())
    })
}

/// Runs up to `nu_max` applications of `M*` from the given start.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn phi4_iterate(
    start: Phi4Start,
    lambda: f64,
    n_max: usize,
    pad: Phi4Pad,
    nu_max: usize,
    tol_converge: f64,
    div_threshold: f64,
    out: *mut *mut Phi4Trace,
) -> Phi4Status {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let setup = Setup {
            pad_policy: pad_policy(pad),
            ..Setup::new(lambda, n_max)
        };
        let settings = IterateSettings {
            nu_max,
            tol_converge,
            div_threshold,
        };
        let trace = iterate_from(&setup, start_label(start), &settings).map_err(core_err)?;
        *out = Box::into_raw(Box::new(Phi4Trace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must come from `phi4_iterate` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn phi4_trace_free(trace: *mut Phi4Trace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of snapshots (start included), 0 for null.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn phi4_trace_len(trace: *const Phi4Trace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.snapshots.len())
}

/// Final status; `nu` and `n` receive its location (`n` is 0 unless singular).
///
/// # Safety
/// `trace` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn phi4_trace_status(
    trace: *const Phi4Trace,
    status: *mut Phi4RunStatus,
    nu: *mut usize,
    n: *mut usize,
) -> Phi4Status {
    guard(|| {
        let trace = trace.as_ref().ok_or_else(|| null("trace"))?;
        let status = status.as_mut().ok_or_else(|| null("status"))?;
        let nu = nu.as_mut().ok_or_else(|| null("nu"))?;
        let n = n.as_mut().ok_or_else(|| null("n"))?;
        let (s, a, b) = match trace.0.status {
            IterationStatus::Converged { nu } => (Phi4RunStatus::Converged, nu, 0),
            IterationStatus::Running => (Phi4RunStatus::Running, trace.0.nu_stop(), 0),
            IterationStatus::Diverged { nu } => (Phi4RunStatus::Diverged, nu, 0),
            IterationStatus::Singular { nu, n } => (Phi4RunStatus::Singular, nu, n),
        };
        *status = s;
        *nu = a;
        *n = b;
        Ok(())
    })
}

/// `delta_n` of snapshot `nu`; `n = 1` gives `delta_1`.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phi4_trace_delta(trace: *const Phi4Trace, nu: usize, n: usize, out: *mut f64) -> Phi4Status {
    guard(|| {
        let trace = trace.as_ref().ok_or_else(|| null("trace"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let snap = trace
            .0
            .snapshots
            .get(nu)
            .ok_or_else(|| (Phi4Status::OutOfRange, format!("no snapshot at nu = {nu}")))?;
        let value = if n == 1 { Some(snap.delta.delta_1) } else { snap.delta.get(n) };
        *out = value.ok_or_else(|| (Phi4Status::OutOfRange, format!("no delta at n = {n}")))?;
        Ok(())
    })
}
