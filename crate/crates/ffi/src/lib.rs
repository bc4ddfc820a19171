//! C interface to the verifier.
//!
//! Every function returns a [`QwStatus`]. On failure the message is kept per thread and can be
//! fetched with [`qw_last_error_message`]. Strings handed out by the library must be released
//! with [`qw_string_free`]; program handles with [`qw_program_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qwhile::hoare::{check_triple, wp, Formula, Mode};
use qwhile::lang::{parse, parse_predicate, ParsedFile};
use qwhile::operator::{ComplexMatrix, Tolerances};
use qwhile::outline::{check_outline, ProofOutline};
use qwhile::semantics::Model;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    ComputeError = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwMode {
    Partial = 0,
    Total = 1,
}

impl From<QwMode> for Mode {
    fn from(m: QwMode) -> Mode {
        match m {
            QwMode::Partial => Mode::Partial,
            QwMode::Total => Mode::Total,
        }
    }
}

/// Parsed program together with its semantic model.
pub struct QwProgram {
    file: ParsedFile,
    model: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg.into()));
}

struct Failure(QwStatus, String);

fn fail<T>(status: QwStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QwStatus::Ok
        }
        Ok(Err(Failure(s, m))) => {
            set_error(m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            QwStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return fail(QwStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(s).to_str().or_else(|_| fail(QwStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(p: *const QwProgram) -> Result<&'a QwProgram, Failure> {
    p.as_ref().ok_or(Failure(QwStatus::NullPointer, "program handle is null".into()))
}

fn out<T>(p: *mut T, v: T) {
    if !p.is_null() {
        unsafe { p.write(v) };
    }
}

fn predicate(prog: &QwProgram, src: &str) -> Result<ComplexMatrix, Failure> {
    parse_predicate(src, &prog.file.decls, prog.model.space(), prog.model.tol())
        .map(|q| q.into_matrix())
        .or_else(|e| fail(QwStatus::ParseError, e.to_string()))
}

/// Parses a program file. On success `*out_handle` receives a new handle.
///
/// # Safety
/// `src` must be a NUL-terminated string and `out_handle` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qw_program_parse(src: *const c_char, out_handle: *mut *mut QwProgram) -> QwStatus {
    guard(|| {
        if out_handle.is_null() {
            return fail(QwStatus::NullPointer, "output pointer is null");
        }
        out_handle.write(ptr::null_mut());
        let src = text(src, "source")?;
        let file = parse(src).or_else(|e| fail(QwStatus::ParseError, e.to_string()))?;
        let model = Model::new(&file.decls, &Tolerances::default());
        out_handle.write(Box::into_raw(Box::new(QwProgram { file, model })));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`qw_program_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qw_program_free(p: *mut QwProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dimension of the joint state space.
///
/// # Safety
/// `p` must be a live handle; `dim` may be null.
#[no_mangle]
pub unsafe extern "C" fn qw_program_dim(p: *const QwProgram, dim: *mut usize) -> QwStatus {
    guard(|| {
        out(dim, handle(p)?.model.dim());
        Ok(())
    })
}

/// Decides `{pre} P {post}`. Predicates use the same syntax as annotations.
///
/// # Safety
/// `p` must be a live handle, `pre` and `post` NUL-terminated; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn qw_check_triple(
    p: *const QwProgram,
    pre: *const c_char,
    post: *const c_char,
    mode: QwMode,
    tol: f64,
    holds: *mut bool,
    min_eig: *mut f64,
) -> QwStatus {
    guard(|| {
        let prog = handle(p)?;
        if !(tol >= 0.0 && tol.is_finite()) {
            return fail(QwStatus::InvalidArgument, "tolerance must be finite and non-negative");
        }
        let a = predicate(prog, text(pre, "precondition")?)?;
        let b = predicate(prog, text(post, "postcondition")?)?;
        let f = Formula::new(a, prog.file.program.clone(), b, mode.into());
        let v = check_triple(&prog.model, &f, tol).or_else(|e| fail(QwStatus::ComputeError, e.to_string()))?;
        out(holds, v.holds);
        out(min_eig, v.min_eig);
        Ok(())
    })
}

/// Checks the annotations embedded in the program as a proof outline.
///
/// # Safety
/// `p` must be a live handle; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn qw_outline_check(
    p: *const QwProgram,
    mode: QwMode,
    tol: f64,
    holds: *mut bool,
    vc_count: *mut usize,
    failed_count: *mut usize,
) -> QwStatus {
    guard(|| {
        let prog = handle(p)?;
        let o = ProofOutline::from_parsed(&prog.file, &prog.model, mode.into())
            .or_else(|e| fail(QwStatus::InvalidArgument, e.to_string()))?;
        let (_, vcs, report) = check_outline(&prog.model, &o, tol).or_else(|e| fail(QwStatus::ComputeError, e.to_string()))?;
        out(holds, report.holds);
        out(vc_count, vcs.len());
        out(failed_count, report.verdicts.iter().filter(|v| !v.holds).count());
        Ok(())
    })
}

/// Weakest precondition of `post`, written row-major into `re`/`im`, each of length `len`.
/// `len` must be at least `dim * dim`.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qw_wp(p: *const QwProgram, post: *const c_char, mode: QwMode, re: *mut f64, im: *mut f64, len: usize) -> QwStatus {
    guard(|| {
        let prog = handle(p)?;
        if re.is_null() || im.is_null() {
            return fail(QwStatus::NullPointer, "output buffer is null");
        }
        let d = prog.model.dim();
        if len < d * d {
            return fail(QwStatus::BufferTooSmall, format!("need {} entries, got {len}", d * d));
        }
        let b = predicate(prog, text(post, "postcondition")?)?;
        let w = wp(&prog.model, &prog.file.program, &b, mode.into()).or_else(|e| fail(QwStatus::ComputeError, e.to_string()))?;
        let (re, im) = (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len));
        for (i, row) in w.matrix.to_rows().iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                re[i * d + j] = z.re;
                im[i * d + j] = z.im;
            }
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Free with [`qw_string_free`].
#[no_mangle]
pub extern "C" fn qw_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(m) => CString::new(m.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn qw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
