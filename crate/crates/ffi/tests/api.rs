use std::ffi::CStr;
use std::ptr;

use vsslab_ffi::*;

fn last_error() -> String {
    let p = vss_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exponents_of_the_reference_set() {
    let mut e = VssExponents::default();
    assert_eq!(unsafe { vss_exponents(1.6, 0.85, 2, &mut e) }, VssStatus::Ok);
    assert!((e.alpha - 7.5).abs() < 1e-12);
    assert!((e.beta - 2.5).abs() < 1e-12);
    assert!((e.gamma - 11.0592).abs() < 1e-10);
}

#[test]
fn range_errors_name_the_bound() {
    let mut e = VssExponents::default();
    assert_eq!(unsafe { vss_exponents(1.2, 0.7, 2, &mut e) }, VssStatus::Range);
    assert!(last_error().contains("p_c = 4/3"));
    assert_eq!(unsafe { vss_exponents(1.6, 0.8, 2, &mut e) }, VssStatus::Range);
    assert!(last_error().contains("q ≤ p/2"));
}

#[test]
fn null_out_pointers_are_rejected() {
    assert_eq!(unsafe { vss_exponents(1.6, 0.85, 2, ptr::null_mut()) }, VssStatus::NullPointer);
    assert_eq!(unsafe { vss_profile_height(ptr::null(), ptr::null_mut()) }, VssStatus::NullPointer);
    unsafe { vss_profile_free(ptr::null_mut()) };
}

#[test]
fn barrier_domain() {
    let mut v = 0.0;
    assert_eq!(unsafe { vss_friendly_giant(1.6, 0.85, 2, 1.0, &mut v) }, VssStatus::Ok);
    assert!((v - 11.0592).abs() < 1e-9);
    assert_eq!(unsafe { vss_friendly_giant(1.6, 0.85, 2, -1.0, &mut v) }, VssStatus::Domain);
}

#[test]
fn profile_handle_round_trip() {
    let mut h: *mut VssProfile = ptr::null_mut();
    assert_eq!(unsafe { vss_profile_build(1.6, 0.85, 2, 1e-6, &mut h) }, VssStatus::Ok);
    assert!(!h.is_null());
    let (mut a, mut f0, mut omega, mut slope, mut u) = (0.0, 0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(vss_profile_height(h, &mut a), VssStatus::Ok);
        assert_eq!(vss_profile_eval(h, 0.0, &mut f0), VssStatus::Ok);
        assert_eq!(vss_profile_tail(h, &mut omega, &mut slope), VssStatus::Ok);
        assert_eq!(vss_profile_eval_u(h, 1.0, 0.0, &mut u), VssStatus::Ok);
        assert_eq!(vss_profile_eval_u(h, 0.0, 0.0, &mut u), VssStatus::Domain);
        assert_eq!(vss_profile_eval(h, -1.0, &mut f0), VssStatus::Domain);
        vss_profile_free(h);
    }
    assert!((a - 27.24).abs() < 0.01, "{a}");
    assert!((slope + 4.0).abs() < 0.2, "{slope}");
    assert!(omega > 0.0);
}

#[test]
fn a_star_matches_the_profile_height() {
    let mut a = 0.0;
    assert_eq!(unsafe { vss_find_a_star(1.6, 0.85, 2, 1e-6, &mut a) }, VssStatus::Ok);
    assert!((a - 27.2412573).abs() < 1e-5, "{a}");
}

#[test]
fn generated_header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/vsslab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["vss_exponents", "vss_profile_build", "vss_profile_free", "vss_last_error", "VSS_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
