//! C ABI for `bdw-core`.
//!
//! Every fallible function returns a [`BdwStatus`]; on failure a message is
//! kept per thread and can be read with [`bdw_last_error_message`]. Objects
//! are opaque handles created by `*_new`/`*_fit`/`*_builtin` functions and
//! released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bdw_core::bdw::{self, BDWParams};
use bdw_core::fit_ml::{self, BivariateDataset, MLFitReport, NestedEmOptions};
use bdw_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidArgument = 3,
    EmptyData = 4,
    DegenerateData = 5,
    ZeroProbability = 6,
    Unidentifiable = 7,
    NotPositiveDefinite = 8,
    Parse = 9,
    Io = 10,
    /// A numerical failure not covered above.
    Numerical = 11,
    /// The library panicked; this is a bug.
    Panic = 12,
}

impl From<&Error> for BdwStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::MismatchedShape(..) | Error::DegenerateDw => {
                BdwStatus::InvalidParameter
            }
            Error::InvalidArgument(_) | Error::TooFewCells(_) => BdwStatus::InvalidArgument,
            Error::EmptyData => BdwStatus::EmptyData,
            Error::DegenerateData(_) => BdwStatus::DegenerateData,
            Error::ZeroProbability { .. } => BdwStatus::ZeroProbability,
            Error::Unidentifiable(_) => BdwStatus::Unidentifiable,
            Error::NotPositiveDefinite => BdwStatus::NotPositiveDefinite,
            Error::Parse { .. } => BdwStatus::Parse,
            Error::Io(_) => BdwStatus::Io,
            Error::InfiniteDensity { .. } | Error::NonFinite { .. } => BdwStatus::Numerical,
        }
    }
}

/// BDW parameters `(alpha, p0, p1, p2)`.
pub struct BdwParams(BDWParams);

/// Paired non-negative counts.
pub struct BdwDataset(BivariateDataset);

/// Result of a maximum-likelihood fit.
pub struct BdwFit(MLFitReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), (BdwStatus, String)>>(f: F) -> BdwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BdwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BdwStatus::Panic
        }
    }
}

fn lib<T>(r: bdw_core::Result<T>) -> Result<T, (BdwStatus, String)> {
    r.map_err(|e| (BdwStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (BdwStatus, String) {
    (BdwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (BdwStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), (BdwStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn bdw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a parameter handle.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn bdw_params_new(
    alpha: f64,
    p0: f64,
    p1: f64,
    p2: f64,
    out: *mut *mut BdwParams,
) -> BdwStatus {
    guard(|| {
        let p = lib(BDWParams::new(alpha, p0, p1, p2))?;
        write(out, Box::into_raw(Box::new(BdwParams(p))), "out")
    })
}

/// Releases a parameter handle; null is ignored.
///
/// # Safety
/// `params` must come from [`bdw_params_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdw_params_free(params: *mut BdwParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// `P(X1 = x1, X2 = x2)`.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_pmf(
    params: *const BdwParams,
    x1: u64,
    x2: u64,
    out: *mut f64,
) -> BdwStatus {
    guard(|| {
        write(
            out,
            bdw::joint_pmf(&deref(params, "params")?.0, x1, x2),
            "out",
        )
    })
}

/// `P(X1 >= x1, X2 >= x2)`.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_sf(
    params: *const BdwParams,
    x1: u64,
    x2: u64,
    out: *mut f64,
) -> BdwStatus {
    guard(|| {
        write(
            out,
            bdw::joint_sf(&deref(params, "params")?.0, x1, x2),
            "out",
        )
    })
}

/// `P(X1 <= x1, X2 <= x2)`.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_cdf(
    params: *const BdwParams,
    x1: u64,
    x2: u64,
    out: *mut f64,
) -> BdwStatus {
    guard(|| {
        write(
            out,
            bdw::joint_cdf(&deref(params, "params")?.0, x1, x2),
            "out",
        )
    })
}

/// Draws `n` pairs with a seeded generator into `x1[0..n]` and `x2[0..n]`.
///
/// # Safety
/// `params` must be a live handle; `x1` and `x2` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn bdw_sample(
    params: *const BdwParams,
    seed: u64,
    n: usize,
    x1: *mut u64,
    x2: *mut u64,
) -> BdwStatus {
    guard(|| {
        let p = deref(params, "params")?;
        if n > 0 && (x1.is_null() || x2.is_null()) {
            return Err(null("output buffer"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 0..n {
            let (a, b) = bdw::sample(&p.0, &mut rng);
            x1.add(k).write(a);
            x2.add(k).write(b);
        }
        Ok(())
    })
}

/// Copies `n` pairs into a new dataset handle.
///
/// # Safety
/// `x1` and `x2` must each hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_dataset_new(
    x1: *const u64,
    x2: *const u64,
    n: usize,
    out: *mut *mut BdwDataset,
) -> BdwStatus {
    guard(|| {
        if n > 0 && (x1.is_null() || x2.is_null()) {
            return Err(null("input buffer"));
        }
        let pairs = (0..n).map(|k| (*x1.add(k), *x2.add(k))).collect();
        let d = lib(BivariateDataset::new(pairs))?;
        write(out, Box::into_raw(Box::new(BdwDataset(d))), "out")
    })
}

/// Loads a bundled dataset by name (`"football"` or `"nasal"`).
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_dataset_builtin(
    name: *const c_char,
    out: *mut *mut BdwDataset,
) -> BdwStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let s = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (BdwStatus::InvalidArgument, "name is not UTF-8".to_string()))?;
        let d = lib(s.parse::<bdw_core::datasets::BuiltinDataset>())?.load();
        write(out, Box::into_raw(Box::new(BdwDataset(d))), "out")
    })
}

/// Number of pairs, or 0 for null.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bdw_dataset_len(data: *const BdwDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// Releases a dataset handle; null is ignored.
///
/// # Safety
/// `data` must come from a dataset constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdw_dataset_free(data: *mut BdwDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Maximum-likelihood fit by nested EM with default settings, started from
/// the univariate-fit initial estimates.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_ml(data: *const BdwDataset, out: *mut *mut BdwFit) -> BdwStatus {
    guard(|| {
        let d = &deref(data, "data")?.0;
        let start = lib(fit_ml::init_estimates(d))?;
        let fit = lib(fit_ml::nested_em(d, &start, &NestedEmOptions::default()))?;
        write(out, Box::into_raw(Box::new(BdwFit(fit))), "out")
    })
}

/// Writes `(alpha, lambda0, lambda1, lambda2)` to `theta[0..4]`.
///
/// # Safety
/// `fit` must be a live handle; `theta` must hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_theta(fit: *const BdwFit, theta: *mut f64) -> BdwStatus {
    guard(|| {
        let t = deref(fit, "fit")?.0.theta_hat.to_array();
        if theta.is_null() {
            return Err(null("theta"));
        }
        ptr::copy_nonoverlapping(t.as_ptr(), theta, 4);
        Ok(())
    })
}

/// Writes `(alpha, p0, p1, p2)` to `params[0..4]`.
///
/// # Safety
/// `fit` must be a live handle; `params` must hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_bdw_params(fit: *const BdwFit, params: *mut f64) -> BdwStatus {
    guard(|| {
        let b = deref(fit, "fit")?.0.bdw;
        if params.is_null() {
            return Err(null("params"));
        }
        ptr::copy_nonoverlapping([b.alpha(), b.p0(), b.p1(), b.p2()].as_ptr(), params, 4);
        Ok(())
    })
}

/// Observed-data log-likelihood at the estimate.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_loglik(fit: *const BdwFit, out: *mut f64) -> BdwStatus {
    guard(|| write(out, deref(fit, "fit")?.0.loglik, "out"))
}

/// Outer iterations performed.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_iterations(fit: *const BdwFit, out: *mut usize) -> BdwStatus {
    guard(|| write(out, deref(fit, "fit")?.0.iterations, "out"))
}

/// 95% Wald bounds of `(alpha, lambda0, lambda1, lambda2)`. Fails with
/// [`BdwStatus::NotPositiveDefinite`] when the fit carries no intervals.
///
/// # Safety
/// `fit` must be a live handle; `lower` and `upper` must each hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_ci(
    fit: *const BdwFit,
    lower: *mut f64,
    upper: *mut f64,
) -> BdwStatus {
    guard(|| {
        let f = deref(fit, "fit")?;
        let ci = f.0.ci95.as_ref().ok_or((
            BdwStatus::NotPositiveDefinite,
            "the fit has no confidence intervals".to_string(),
        ))?;
        if lower.is_null() || upper.is_null() {
            return Err(null("bounds"));
        }
        ptr::copy_nonoverlapping(ci.lower.as_ptr(), lower, 4);
        ptr::copy_nonoverlapping(ci.upper.as_ptr(), upper, 4);
        Ok(())
    })
}

/// Releases a fit handle; null is ignored.
///
/// # Safety
/// `fit` must come from [`bdw_fit_ml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bdw_fit_free(fit: *mut BdwFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
