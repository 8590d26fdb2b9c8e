//! C ABI for the `rabi-zeta` library.
//!
//! # Conventions
//!
//! - Every fallible function returns an [`RzStatus`]; `RZ_STATUS_OK` (0) means
//!   success and results are written through out-pointers.
//! - On failure a thread-local message is stored and can be read with
//!   [`rz_last_error_message`] until the next failing call on the same thread.
//! - Models, zeta results and Apéry tables are opaque handles created by
//!   `rz_*_new`-style constructors and released with the matching `*_free`.
//!   Passing NULL to a `*_free` function is a no-op.
//! - Strings returned through `char **` out-pointers are owned by the caller
//!   and must be released with [`rz_string_free`].
//! - Panics never cross the boundary; they are reported as `RZ_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rabi_zeta::apery::{apery_classic, beukers_residual, ExactApery};
use rabi_zeta::operator_oracle::{ModelSpec, DEFAULT_N};
use rabi_zeta::trace_terms::{dn_r_m_integral, family_operator, TraceFamily};
use rabi_zeta::quadrature::QuadratureSpec;
use rabi_zeta::zeta_values::{convergence_radius, parity_difference, zeta_value, ZetaMethod, ZetaRequest, ZetaResult};
use rabi_zeta::{Error, C64};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RzStatus {
    /// Success.
    Ok = 0,
    /// An argument sits on a pole.
    Pole = 1,
    /// A parameter lies outside the domain of the operation.
    Domain = 2,
    /// A parameter is at an excluded half-integer.
    HalfIntegerPole = 3,
    /// A series or iteration did not converge.
    NoConvergence = 4,
    /// A truncation dimension is invalid.
    InvalidDimension = 5,
    /// A truncated operator is numerically singular.
    SingularOperator = 6,
    /// A combinatorial expansion is too large.
    CombinatorialBlowup = 7,
    /// The eigenvalue solver failed.
    EigenFailure = 8,
    /// λ is too close to the spectrum.
    NearPole = 9,
    /// A vector has the wrong length.
    LengthMismatch = 10,
    /// A quadrature node hit a singularity.
    NodeSingularity = 11,
    /// The coupling series is outside its radius of convergence.
    RadiusExceeded = 12,
    /// Two independent evaluation routes disagree.
    Inconsistent = 13,
    /// A required pointer argument was NULL.
    NullPointer = 20,
    /// An enum or index argument is out of range.
    InvalidArgument = 21,
    /// The library panicked; this is a bug.
    Panic = 99,
}

impl From<&Error> for RzStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Pole(_) => RzStatus::Pole,
            Error::Domain(_) => RzStatus::Domain,
            Error::HalfIntegerPole(_) => RzStatus::HalfIntegerPole,
            Error::NoConvergence(_) => RzStatus::NoConvergence,
            Error::InvalidDimension(_) => RzStatus::InvalidDimension,
            Error::SingularOperator(_) => RzStatus::SingularOperator,
            Error::CombinatorialBlowup(_) => RzStatus::CombinatorialBlowup,
            Error::EigenFailure(_) => RzStatus::EigenFailure,
            Error::NearPole(_) => RzStatus::NearPole,
            Error::LengthMismatch { .. } => RzStatus::LengthMismatch,
            Error::NodeSingularity(_) => RzStatus::NodeSingularity,
            Error::RadiusExceeded { .. } => RzStatus::RadiusExceeded,
            Error::Inconsistent(_) => RzStatus::Inconsistent,
        }
    }
}

/// Complex number passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzComplex {
    /// Real part.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
}

impl From<C64> for RzComplex {
    fn from(z: C64) -> Self {
        RzComplex { re: z.re, im: z.im }
    }
}

impl From<RzComplex> for C64 {
    fn from(z: RzComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

/// A value with its error estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzValue {
    /// The value.
    pub value: RzComplex,
    /// Absolute error estimate.
    pub abs_error: f64,
}

/// Evaluation route of a zeta value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RzMethod {
    /// Integral route for real λ inside its domain, operator route otherwise.
    Default = 0,
    /// Coupling series with integral coefficients.
    SeriesIntegral = 1,
    /// Coupling series with operator coefficients.
    SeriesOperator = 2,
    /// Eigenvalue sum of the truncated Hamiltonian.
    EigenOracle = 3,
}

/// Trace-term family.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RzFamily {
    /// Fock-space family.
    Flat = 0,
    /// Single Bergman block of weight `nu`.
    Nu = 1,
    /// Sum of the ν = 1/2 and ν = 3/2 blocks.
    Plus = 2,
    /// Difference of the ν = 1/2 and ν = 3/2 blocks.
    Minus = 3,
}

/// Trace-term evaluation route.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RzTraceMethod {
    /// Truncated operators.
    Operator = 0,
    /// Tensor quadrature of the integral representation.
    Integral = 1,
}

/// Opaque Hamiltonian handle.
pub struct RzModel {
    spec: ModelSpec,
}

/// Opaque zeta-value result handle.
pub struct RzZetaResult {
    result: ZetaResult,
}

/// Opaque table of classical Apéry numbers.
pub struct RzAperyTable {
    table: ExactApery,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), RzStatus>>(f: F) -> RzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RzStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RzStatus::Panic
        }
    }
}

fn lib<T>(r: rabi_zeta::Result<T>) -> Result<T, RzStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        RzStatus::from(&e)
    })
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), RzStatus> {
    if p.is_null() {
        set_error(format!("{name} is NULL"));
        Err(RzStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// Message of the last failing call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn rz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn new_model(spec: ModelSpec, out: *mut *mut RzModel) -> RzStatus {
    guard(|| {
        non_null(out, "out")?;
        lib(spec.validate())?;
        *out = Box::into_raw(Box::new(RzModel { spec }));
        Ok(())
    })
}

/// One-photon model with coupling g, splitting Δ and bias ε.
#[no_mangle]
pub unsafe extern "C" fn rz_model_one_photon(g: f64, delta: f64, eps: f64, out: *mut *mut RzModel) -> RzStatus {
    new_model(ModelSpec::OnePhoton { g, delta, eps }, out)
}

/// Two-photon model with coupling g, splitting Δ and bias ε.
#[no_mangle]
pub unsafe extern "C" fn rz_model_two_photon(g: f64, delta: f64, eps: f64, out: *mut *mut RzModel) -> RzStatus {
    new_model(ModelSpec::TwoPhoton { g, delta, eps }, out)
}

/// Single weighted-Bergman block of weight ν > 0.
#[no_mangle]
pub unsafe extern "C" fn rz_model_bergman(nu: f64, g: f64, delta: f64, eps: f64, out: *mut *mut RzModel) -> RzStatus {
    new_model(ModelSpec::BergmanNu { nu, g, delta, eps }, out)
}

/// Non-commutative harmonic oscillator with α, β > 0, αβ > 1.
#[no_mangle]
pub unsafe extern "C" fn rz_model_ncho(alpha: f64, beta: f64, eta: f64, out: *mut *mut RzModel) -> RzStatus {
    new_model(ModelSpec::Ncho { alpha, beta, eta }, out)
}

/// Releases a model handle.
#[no_mangle]
pub unsafe extern "C" fn rz_model_free(model: *mut RzModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// The Δ-radius 1/C of the model at λ.
#[no_mangle]
pub unsafe extern "C" fn rz_convergence_radius(model: *const RzModel, lambda: RzComplex, out: *mut f64) -> RzStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = lib(convergence_radius(&(*model).spec, lambda.into()))?;
        Ok(())
    })
}

unsafe fn zeta_common(
    model: *const RzModel,
    n: u32,
    lambda: RzComplex,
    method: RzMethod,
    max_m: usize,
    tol: f64,
    trunc_n: usize,
    parity: bool,
    out: *mut *mut RzZetaResult,
) -> RzStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let mut req = ZetaRequest::new((*model).spec, n, lambda.into());
        match method {
            RzMethod::Default => {}
            RzMethod::SeriesIntegral => req.method = ZetaMethod::SeriesIntegral,
            RzMethod::SeriesOperator => req.method = ZetaMethod::SeriesOperator,
            RzMethod::EigenOracle => req.method = ZetaMethod::EigenOracle,
        }
        if max_m > 0 {
            req.max_m = max_m;
        }
        if tol > 0.0 {
            req.tol = tol;
        }
        req.trunc_n = if trunc_n > 0 { trunc_n } else { DEFAULT_N };
        let result = lib(if parity { parity_difference(&req) } else { zeta_value(&req) })?;
        *out = Box::into_raw(Box::new(RzZetaResult { result }));
        Ok(())
    })
}

/// ζ(H; n, λ). Zero `max_m`, non-positive `tol` and zero `trunc_n` select the
/// library defaults.
#[no_mangle]
pub unsafe extern "C" fn rz_zeta_value(
    model: *const RzModel,
    n: u32,
    lambda: RzComplex,
    method: RzMethod,
    max_m: usize,
    tol: f64,
    trunc_n: usize,
    out: *mut *mut RzZetaResult,
) -> RzStatus {
    zeta_common(model, n, lambda, method, max_m, tol, trunc_n, false, out)
}

/// Even-sector minus odd-sector zeta value (two-photon model and oscillator);
/// arguments as in [`rz_zeta_value`].
#[no_mangle]
pub unsafe extern "C" fn rz_parity_difference(
    model: *const RzModel,
    n: u32,
    lambda: RzComplex,
    method: RzMethod,
    max_m: usize,
    tol: f64,
    trunc_n: usize,
    out: *mut *mut RzZetaResult,
) -> RzStatus {
    zeta_common(model, n, lambda, method, max_m, tol, trunc_n, true, out)
}

/// Value and error estimate of a zeta result.
#[no_mangle]
pub unsafe extern "C" fn rz_zeta_result_value(res: *const RzZetaResult, out: *mut RzValue) -> RzStatus {
    guard(|| {
        non_null(res, "result")?;
        non_null(out, "out")?;
        let r = &(*res).result;
        *out = RzValue { value: r.value.into(), abs_error: r.abs_error };
        Ok(())
    })
}

/// The coupling-free Hurwitz-zeta part of a zeta result.
#[no_mangle]
pub unsafe extern "C" fn rz_zeta_result_base_term(res: *const RzZetaResult, out: *mut RzComplex) -> RzStatus {
    guard(|| {
        non_null(res, "result")?;
        non_null(out, "out")?;
        *out = (*res).result.base_term.into();
        Ok(())
    })
}

/// Number of per-m terms (0 for a NULL handle).
#[no_mangle]
pub unsafe extern "C" fn rz_zeta_result_num_terms(res: *const RzZetaResult) -> usize {
    if res.is_null() {
        0
    } else {
        (*res).result.per_m_terms.len()
    }
}

/// The per-m term with zero-based index `i` (m = i + 1).
#[no_mangle]
pub unsafe extern "C" fn rz_zeta_result_term(res: *const RzZetaResult, i: usize, out: *mut RzComplex) -> RzStatus {
    guard(|| {
        non_null(res, "result")?;
        non_null(out, "out")?;
        let res = &*res;
        match res.result.per_m_terms.get(i) {
            Some(&t) => {
                *out = t.into();
                Ok(())
            }
            None => {
                set_error(format!("term index {i} out of range"));
                Err(RzStatus::InvalidArgument)
            }
        }
    })
}

/// Releases a zeta result handle.
#[no_mangle]
pub unsafe extern "C" fn rz_zeta_result_free(res: *mut RzZetaResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// ∂ⁿR_m of a family by the operator route (`trunc_n`, 0 for the default) or
/// the integral route (`level` of the tanh–sinh rule, 0 for the default rule).
#[no_mangle]
pub unsafe extern "C" fn rz_trace_term(
    family: RzFamily,
    nu: f64,
    lambda: RzComplex,
    g: f64,
    eps: RzComplex,
    m: usize,
    deriv: usize,
    method: RzTraceMethod,
    trunc_n: usize,
    level: u32,
    out: *mut RzValue,
) -> RzStatus {
    guard(|| {
        non_null(out, "out")?;
        let fam = match family {
            RzFamily::Flat => TraceFamily::Flat,
            RzFamily::Nu => TraceFamily::Nu(nu),
            RzFamily::Plus => TraceFamily::Plus,
            RzFamily::Minus => TraceFamily::Minus,
        };
        let v = match method {
            RzTraceMethod::Operator => {
                let dim = if trunc_n > 0 { trunc_n } else { DEFAULT_N };
                lib(family_operator(fam, g, lambda.into(), eps.into(), m, deriv, dim))?
            }
            RzTraceMethod::Integral => {
                let spec = if level > 0 { QuadratureSpec::tanh_sinh(level) } else { QuadratureSpec::default_for_dim(2 * m) };
                lib(dn_r_m_integral(fam, lambda.into(), g, eps.into(), m, deriv, &spec))?
            }
        };
        *out = RzValue { value: v.value.into(), abs_error: v.abs_error };
        Ok(())
    })
}

/// Classical Apéry numbers Aₙ, Bₙ for n ≤ `n_max`, exactly.
#[no_mangle]
pub unsafe extern "C" fn rz_apery_classic(n_max: usize, out: *mut *mut RzAperyTable) -> RzStatus {
    guard(|| {
        non_null(out, "out")?;
        let table = lib(apery_classic(n_max))?;
        *out = Box::into_raw(Box::new(RzAperyTable { table }));
        Ok(())
    })
}

/// Number of entries (n_max + 1) of an Apéry table (0 for NULL).
#[no_mangle]
pub unsafe extern "C" fn rz_apery_table_len(table: *const RzAperyTable) -> usize {
    if table.is_null() {
        0
    } else {
        (*table).table.a_list.len()
    }
}

/// Aₙ (`which` = 0) or Bₙ (`which` = 1) as a decimal `p` or `p/q` string;
/// release it with [`rz_string_free`].
#[no_mangle]
pub unsafe extern "C" fn rz_apery_table_entry(
    table: *const RzAperyTable,
    which: u32,
    n: usize,
    out: *mut *mut c_char,
) -> RzStatus {
    guard(|| {
        non_null(table, "table")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let t = &(*table).table;
        let s = match (which, t.a_list.get(n), t.b_list.get(n)) {
            (0, Some(a), _) => a.to_string(),
            (1, _, Some(b)) => b.to_string(),
            _ => {
                set_error(format!("no entry (which = {which}, n = {n})"));
                return Err(RzStatus::InvalidArgument);
            }
        };
        *out = CString::new(s).map_err(|_| RzStatus::Panic)?.into_raw();
        Ok(())
    })
}

/// Releases an Apéry table.
#[no_mangle]
pub unsafe extern "C" fn rz_apery_table_free(table: *mut RzAperyTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// |(−1)ⁿJ♭ₙ(n+1, 0) − (Aₙζ(2) − Bₙ)|.
#[no_mangle]
pub unsafe extern "C" fn rz_beukers_residual(n: u32, out: *mut f64) -> RzStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = lib(beukers_residual(n))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn status_codes_follow_error_kinds() {
        assert_eq!(RzStatus::from(&Error::RadiusExceeded { ratio: 2.0 }), RzStatus::RadiusExceeded);
        assert_eq!(RzStatus::from(&Error::NoConvergence("x".into())), RzStatus::NoConvergence);
        assert_eq!(RzStatus::Ok as i32, 0);
    }

    #[test]
    fn error_message_is_thread_local() {
        set_error("first".into());
        let other = std::thread::spawn(|| unsafe { CStr::from_ptr(rz_last_error_message()).to_str().unwrap().to_owned() })
            .join()
            .unwrap();
        assert_eq!(other, "");
        assert_eq!(unsafe { CStr::from_ptr(rz_last_error_message()) }.to_str().unwrap(), "first");
    }

    #[test]
    fn version_matches_crate() {
        let v = unsafe { CStr::from_ptr(rz_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
