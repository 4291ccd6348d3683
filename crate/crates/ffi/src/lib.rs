//! C ABI over the exponent algebra and the self-similar profile.
//!
//! Every function returns a [`VssStatus`]; results go through out-pointers.
//! The message of the most recent failure on the calling thread is available
//! from [`vss_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use vsslab::error::Error;
use vsslab::params::{derive_exponents, friendly_giant};
use vsslab::profile::{build_vss_profile, eval_u, find_a_star, ProfileControl, SelfSimilarSolution};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VssStatus {
    Ok = 0,
    NullPointer = 1,
    /// Exponents outside the admissible range.
    Range = 2,
    /// Argument outside a function's domain.
    Domain = 3,
    /// Shooting, integration or tail fit failed.
    Numerical = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// Derived exponents of an admissible `(p, q, N)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VssExponents {
    pub p: f64,
    pub q: f64,
    pub n: u32,
    pub p_c: f64,
    pub q_star: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma: f64,
    pub tail_barrier_exp: f64,
    pub tail_profile_exp: f64,
}

/// Opaque handle to a constructed profile.
pub struct VssProfile {
    inner: SelfSimilarSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VssStatus {
    match e {
        Error::Range(_) => VssStatus::Range,
        Error::Domain(_) | Error::Spec(_) | Error::Config { .. } => VssStatus::Domain,
        _ => VssStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), VssStatus>) -> VssStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VssStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic in vsslab".into());
            VssStatus::Internal
        }
    }
}

fn fail(e: Error) -> VssStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null() -> VssStatus {
    set_error("null pointer argument".into());
    VssStatus::NullPointer
}

/// Message of the last failure on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with the exponents of `(p, q, n)`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `VssExponents`.
#[no_mangle]
pub unsafe extern "C" fn vss_exponents(p: f64, q: f64, n: u32, out: *mut VssExponents) -> VssStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let e = derive_exponents(p, q, n).map_err(fail)?;
        *out = VssExponents {
            p: e.p,
            q: e.q,
            n: e.n,
            p_c: e.p_c,
            q_star: e.q_star,
            alpha: e.alpha,
            beta: e.beta,
            eta: e.eta,
            gamma: e.gamma,
            tail_barrier_exp: e.tail_barrier_exp,
            tail_profile_exp: e.tail_profile_exp,
        };
        Ok(())
    })
}

/// Barrier value `γ r^{−α/β}`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn vss_friendly_giant(p: f64, q: f64, n: u32, r: f64, out: *mut f64) -> VssStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let e = derive_exponents(p, q, n).map_err(fail)?;
        *out = friendly_giant(&e, r).map_err(fail)?;
        Ok(())
    })
}

/// Shooting threshold to absolute tolerance `tol`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn vss_find_a_star(p: f64, q: f64, n: u32, tol: f64, out: *mut f64) -> VssStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let e = derive_exponents(p, q, n).map_err(fail)?;
        let ctrl = ProfileControl {
            side_probes: 0,
            ..ProfileControl::default()
        };
        *out = find_a_star(&e, ctrl.bracket, tol, &ctrl).map_err(fail)?;
        Ok(())
    })
}

/// Builds the profile; on success `*out` owns a handle to release with [`vss_profile_free`].
///
/// # Safety
/// `out` must be null or point to a writable handle pointer.
#[no_mangle]
pub unsafe extern "C" fn vss_profile_build(p: f64, q: f64, n: u32, tol: f64, out: *mut *mut VssProfile) -> VssStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let e = derive_exponents(p, q, n).map_err(fail)?;
        let ctrl = ProfileControl {
            side_probes: 0,
            ..ProfileControl::default()
        };
        let inner = build_vss_profile(&e, tol, &ctrl).map_err(fail)?;
        *out = Box::into_raw(Box::new(VssProfile { inner }));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must be null or a handle from [`vss_profile_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vss_profile_free(h: *mut VssProfile) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Profile height `f_U(0)`.
///
/// # Safety
/// `h` must be a live handle or null; `out` a writable `double` or null.
#[no_mangle]
pub unsafe extern "C" fn vss_profile_height(h: *const VssProfile, out: *mut f64) -> VssStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null());
        };
        *out = h.inner.a_u;
        Ok(())
    })
}

/// Fitted tail amplitude and log–log tail slope.
///
/// # Safety
/// `h` must be a live handle or null; `omega` and `slope` writable `double`s or null.
#[no_mangle]
pub unsafe extern "C" fn vss_profile_tail(h: *const VssProfile, omega: *mut f64, slope: *mut f64) -> VssStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), omega.is_null() || slope.is_null()) else {
            return Err(null());
        };
        *omega = h.inner.omega_star_est;
        *slope = h.inner.tail_slope;
        Ok(())
    })
}

/// `f_U(rho)`, `rho ≥ 0`.
///
/// # Safety
/// `h` must be a live handle or null; `out` a writable `double` or null.
#[no_mangle]
pub unsafe extern "C" fn vss_profile_eval(h: *const VssProfile, rho: f64, out: *mut f64) -> VssStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null());
        };
        if !(rho >= 0.0) {
            return Err(fail(Error::Domain(format!("rho must be nonnegative, got {rho}"))));
        }
        *out = h.inner.profile_at(rho);
        Ok(())
    })
}

/// `U(t, r) = t^{−α} f_U(r t^{−β})`.
///
/// # Safety
/// `h` must be a live handle or null; `out` a writable `double` or null.
#[no_mangle]
pub unsafe extern "C" fn vss_profile_eval_u(h: *const VssProfile, t: f64, r: f64, out: *mut f64) -> VssStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null());
        };
        *out = eval_u(&h.inner, t, r).map_err(fail)?;
        Ok(())
    })
}
