use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use qwhile_ffi::*;

const QTEL: &str = include_str!("../../core/corpus/qtel_outline.qw");

fn parse(src: &str) -> *mut QwProgram {
    let s = CString::new(src).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qw_program_parse(s.as_ptr(), &mut h) }, QwStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> Option<String> {
    let p = qw_last_error_message();
    if p.is_null() {
        return None;
    }
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { qw_string_free(p) };
    Some(s)
}

#[test]
fn triple_check_through_handle() {
    let h = parse("var q: 2; prog { apply H(q); }");
    let mut dim = 0;
    assert_eq!(unsafe { qw_program_dim(h, &mut dim) }, QwStatus::Ok);
    assert_eq!(dim, 2);
    let (pre, post) = (CString::new("proj(|->)").unwrap(), CString::new("proj(|1>)").unwrap());
    let (mut holds, mut eig) = (false, f64::NAN);
    let st = unsafe { qw_check_triple(h, pre.as_ptr(), post.as_ptr(), QwMode::Total, 1e-9, &mut holds, &mut eig) };
    assert_eq!(st, QwStatus::Ok);
    assert!(holds && eig.abs() < 1e-9);
    let bad = CString::new("proj(|+>)").unwrap();
    let st = unsafe { qw_check_triple(h, bad.as_ptr(), post.as_ptr(), QwMode::Total, 1e-9, &mut holds, &mut eig) };
    assert_eq!(st, QwStatus::Ok);
    assert!(!holds && eig < -0.4);
    assert_eq!(last_error(), None);
    unsafe { qw_program_free(h) };
}

#[test]
fn outline_of_teleportation() {
    let h = parse(QTEL);
    let (mut holds, mut n, mut failed) = (false, 0, 99);
    assert_eq!(unsafe { qw_outline_check(h, QwMode::Partial, 1e-8, &mut holds, &mut n, &mut failed) }, QwStatus::Ok);
    assert!(holds);
    assert_eq!((n, failed), (9, 0));
    unsafe { qw_program_free(h) };
}

#[test]
fn wp_fills_row_major_buffer() {
    let h = parse("var q: 2; prog { apply X(q); }");
    let post = CString::new("proj(|0>)").unwrap();
    let (mut re, mut im) = ([0.0; 4], [1.0; 4]);
    assert_eq!(unsafe { qw_wp(h, post.as_ptr(), QwMode::Total, re.as_mut_ptr(), im.as_mut_ptr(), 4) }, QwStatus::Ok);
    assert_eq!(re, [0.0, 0.0, 0.0, 1.0]);
    assert_eq!(im, [0.0; 4]);
    let st = unsafe { qw_wp(h, post.as_ptr(), QwMode::Total, re.as_mut_ptr(), im.as_mut_ptr(), 3) };
    assert_eq!(st, QwStatus::BufferTooSmall);
    assert!(last_error().unwrap().contains("need 4"));
    unsafe { qw_program_free(h) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut h = ptr::null_mut();
    let src = CString::new("var q: 2; prog { apply H(r); }").unwrap();
    assert_eq!(unsafe { qw_program_parse(src.as_ptr(), &mut h) }, QwStatus::ParseError);
    assert!(h.is_null());
    assert!(last_error().is_some());
    assert_eq!(unsafe { qw_program_parse(ptr::null(), &mut h) }, QwStatus::NullPointer);
    assert_eq!(unsafe { qw_program_dim(ptr::null(), ptr::null_mut()) }, QwStatus::NullPointer);
    let bytes = [0xffu8, 0];
    assert_eq!(unsafe { qw_program_parse(bytes.as_ptr().cast(), &mut h) }, QwStatus::InvalidUtf8);

    let h = parse("var q: 2; prog { skip; }");
    let not_pred = CString::new("2 * proj(|0>)").unwrap();
    let id = CString::new("I").unwrap();
    let st = unsafe { qw_check_triple(h, not_pred.as_ptr(), id.as_ptr(), QwMode::Partial, 1e-9, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, QwStatus::ParseError);
    let st = unsafe { qw_check_triple(h, id.as_ptr(), id.as_ptr(), QwMode::Partial, f64::NAN, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, QwStatus::InvalidArgument);
    // No annotations at all.
    let mut holds = true;
    let st = unsafe { qw_outline_check(h, QwMode::Partial, 1e-8, &mut holds, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, QwStatus::InvalidArgument);
    unsafe {
        qw_program_free(h);
        qw_program_free(ptr::null_mut());
        qw_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_interface_and_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/qwhile.h")).unwrap();
    for f in ["qw_program_parse", "qw_program_free", "qw_program_dim", "qw_check_triple", "qw_outline_check", "qw_wp", "qw_last_error_message", "qw_string_free"] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("typedef struct QwProgram QwProgram;"));
    // Only when a C compiler is around.
    let src = format!("{}/smoke.c", std::env::temp_dir().display());
    std::fs::write(&src, "#include \"qwhile.h\"\nint main(void) { QwProgram *p = 0; return qw_program_parse(\"\", &p) == QW_STATUS_OK; }\n").unwrap();
    if let Ok(o) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", &format!("{dir}/include"), &src]).output() {
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}
