//! C ABI for the srcf integration rules and filters.
//!
//! Every function returns an [`SrcfStatus`]. On failure a message is kept per
//! thread and can be read with [`srcf_last_error_message`]. Matrices cross the
//! boundary as row-major `double` arrays. Handles are opaque and must be
//! released with the matching `_free` function.
//!
//! Callbacks are invoked on the calling thread, synchronously, and must write
//! exactly `out_len` values. A non-zero return aborts the operation with
//! `SRCF_STATUS_CALLBACK_FAILED`.

use std::cell::{Cell, RefCell};
use std::ffi::{c_char, c_void, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use srcf::filter::{Filter, FilterError};
use srcf::integrator::IntegrationError;
use srcf::linalg::LinalgError;
use srcf::{
    build_rule, expect, GaussianBelief, IntegrationScheme, RngStream, RuleError, SchemeKind, SigmaPointSet,
    SpdMatrix, StateSpaceModel, VectorFunction,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrcfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Diverged = 3,
    NonFinite = 4,
    CallbackFailed = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrcfSchemeKind {
    Ckf3 = 0,
    Ckf5 = 1,
    Sif3 = 2,
    Sif5 = 3,
    Qsif5 = 4,
    Mc = 5,
}

/// Integration scheme selector. `n_m` is ignored for CKF3/CKF5 and
/// `mc_samples` for everything but MC.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrcfScheme {
    pub kind: SrcfSchemeKind,
    pub n_m: usize,
    pub mc_samples: usize,
}

/// `out[0..out_len] = g(x[0..n])`; return 0 on success.
pub type SrcfCallback =
    Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, n: usize, out: *mut f64, out_len: usize) -> i32>;

/// Nonlinear model `x' = f(x) + w`, `y = h(x) + v` with `w ~ N(0, Q)`,
/// `v ~ N(0, R)`. `q` is `state_dim²` and `r` is `obs_dim²` values.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrcfModel {
    pub state_dim: usize,
    pub obs_dim: usize,
    pub transition: SrcfCallback,
    pub observation: SrcfCallback,
    pub user_data: *mut c_void,
    pub q: *const f64,
    pub r: *const f64,
}

/// A weighted sigma-point set.
pub struct SrcfRule {
    set: SigmaPointSet,
}

/// A running filter.
pub struct SrcfFilter {
    filter: Filter,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
    static CALLBACK_FAILED: Cell<Option<i32>> = const { Cell::new(None) };
}

struct Failure(SrcfStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(SrcfStatus::NullPointer, format!("`{what}` is null"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure(SrcfStatus::InvalidArgument, msg.into())
    }
}

impl From<RuleError> for Failure {
    fn from(e: RuleError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<IntegrationError> for Failure {
    fn from(e: IntegrationError) -> Self {
        let status = match e {
            IntegrationError::NonFinite { .. } => SrcfStatus::NonFinite,
            _ => SrcfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<FilterError> for Failure {
    fn from(e: FilterError) -> Self {
        let status = match &e {
            FilterError::Diverged { .. } => SrcfStatus::Diverged,
            FilterError::Integration {
                source: IntegrationError::NonFinite { .. },
                ..
            } => SrcfStatus::NonFinite,
            FilterError::Integration { .. } => SrcfStatus::Diverged,
            FilterError::Model(_) => SrcfStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<LinalgError> for Failure {
    fn from(e: LinalgError) -> Self {
        Failure::invalid(e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `body`, turning errors, callback failures and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SrcfStatus {
    CALLBACK_FAILED.with(|c| c.set(None));
    let outcome = catch_unwind(AssertUnwindSafe(body));
    // a failed callback poisons the result with NaN, report the cause instead
    let callback = CALLBACK_FAILED.with(|c| c.take());
    let (status, msg) = match (outcome, callback) {
        (Ok(Ok(())), None) => {
            set_last_error("");
            return SrcfStatus::Ok;
        }
        (Ok(_), Some(code)) => (SrcfStatus::CallbackFailed, format!("callback returned {code}")),
        (Ok(Err(Failure(s, m))), None) => (s, m),
        (Err(p), _) => {
            let what = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (SrcfStatus::Panic, format!("internal panic: {what}"))
        }
    };
    set_last_error(&msg);
    status
}

fn scheme_from(s: &SrcfScheme) -> Result<IntegrationScheme, Failure> {
    let kind = match s.kind {
        SrcfSchemeKind::Ckf3 => SchemeKind::Ckf3,
        SrcfSchemeKind::Ckf5 => SchemeKind::Ckf5,
        SrcfSchemeKind::Sif3 => SchemeKind::Sif3,
        SrcfSchemeKind::Sif5 => SchemeKind::Sif5,
        SrcfSchemeKind::Qsif5 => SchemeKind::Qsif5,
        SrcfSchemeKind::Mc => SchemeKind::Mc,
    };
    let n_m = if kind.is_deterministic() { 1 } else { s.n_m };
    let mc = if kind == SchemeKind::Mc { s.mc_samples } else { 1 };
    Ok(IntegrationScheme::new(kind, n_m, mc)?)
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn square(p: *const f64, n: usize, what: &str) -> Result<SpdMatrix, Failure> {
    let m = DMatrix::from_row_slice(n, n, slice(p, n * n, what)?);
    let m = SpdMatrix::new(m).map_err(|e| Failure::invalid(format!("`{what}`: {e}")))?;
    // semidefinite inputs are fine (zero noise), clearly negative directions are not
    let eig = m.as_matrix().symmetric_eigenvalues();
    let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if eig.min() < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Failure::invalid(format!("`{what}` has a negative eigenvalue {:e}", eig.min())));
    }
    Ok(m)
}

struct UserData(*mut c_void);

// The caller promises the callback may be invoked with this pointer from
// whichever thread calls into the library.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

impl UserData {
    fn get(&self) -> *mut c_void {
        self.0
    }
}

fn wrap_callback(cb: SrcfCallback, user_data: *mut c_void, out_len: usize, what: &str) -> Result<VectorFunction, Failure> {
    let cb = cb.ok_or_else(|| Failure::null(what))?;
    let ud = UserData(user_data);
    Ok(VectorFunction::vector(out_len, move |x: &DVector<f64>| {
        let mut out = DVector::from_element(out_len, f64::NAN);
        let code = unsafe { cb(ud.get(), x.as_ptr(), x.len(), out.as_mut_ptr(), out_len) };
        if code != 0 {
            CALLBACK_FAILED.with(|c| {
                if c.get().is_none() {
                    c.set(Some(code));
                }
            });
            out.fill(f64::NAN);
        }
        out
    }))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn srcf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srcf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Draws a single sigma-point set (one repetition) for dimension `n`.
///
/// # Safety
/// `scheme` must be valid to read and `out` valid to write.
#[no_mangle]
pub unsafe extern "C" fn srcf_rule_build(
    scheme: *const SrcfScheme,
    n: usize,
    seed: u64,
    out: *mut *mut SrcfRule,
) -> SrcfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = ptr::null_mut();
        let scheme = scheme_from(scheme.as_ref().ok_or_else(|| Failure::null("scheme"))?)?;
        let mut rng = RngStream::new(seed);
        let set = build_rule(&scheme, n, &mut rng)?;
        *out = Box::into_raw(Box::new(SrcfRule { set }));
        Ok(())
    })
}

/// Number of points, or 0 for a null handle.
///
/// # Safety
/// `rule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srcf_rule_len(rule: *const SrcfRule) -> usize {
    rule.as_ref().map_or(0, |r| r.set.len())
}

/// Point dimension, or 0 for a null handle.
///
/// # Safety
/// `rule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srcf_rule_dim(rule: *const SrcfRule) -> usize {
    rule.as_ref().map_or(0, |r| r.set.dim())
}

/// Copies the points as a `len × dim` row-major array (one point per row).
///
/// # Safety
/// `rule` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srcf_rule_points(rule: *const SrcfRule, out: *mut f64, out_len: usize) -> SrcfStatus {
    guard(|| {
        let r = rule.as_ref().ok_or_else(|| Failure::null("rule"))?;
        let pts = r.set.points();
        let need = pts.len();
        if out_len != need {
            return Err(Failure::invalid(format!("points buffer holds {out_len} values, need {need}")));
        }
        // column-major n×K is row-major K×n
        slice_mut(out, out_len, "out")?.copy_from_slice(pts.as_slice());
        Ok(())
    })
}

/// Copies the weights.
///
/// # Safety
/// `rule` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srcf_rule_weights(rule: *const SrcfRule, out: *mut f64, out_len: usize) -> SrcfStatus {
    guard(|| {
        let r = rule.as_ref().ok_or_else(|| Failure::null("rule"))?;
        let w = r.set.weights();
        if out_len != w.len() {
            return Err(Failure::invalid(format!("weights buffer holds {out_len} values, need {}", w.len())));
        }
        slice_mut(out, out_len, "out")?.copy_from_slice(w);
        Ok(())
    })
}

/// # Safety
/// `rule` must be null or a handle from [`srcf_rule_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srcf_rule_free(rule: *mut SrcfRule) {
    if !rule.is_null() {
        drop(Box::from_raw(rule));
    }
}

/// Estimates `E[g(x)]` for `x ~ N(mean, cov)`, writing `out_len` values.
///
/// # Safety
/// Pointers must be valid for the stated lengths (`cov` holds `n²` values).
#[no_mangle]
pub unsafe extern "C" fn srcf_expect(
    scheme: *const SrcfScheme,
    n: usize,
    mean: *const f64,
    cov: *const f64,
    g: SrcfCallback,
    user_data: *mut c_void,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> SrcfStatus {
    guard(|| {
        let scheme = scheme_from(scheme.as_ref().ok_or_else(|| Failure::null("scheme"))?)?;
        if out_len == 0 {
            return Err(Failure::invalid("out_len must be at least 1"));
        }
        let out = slice_mut(out, out_len, "out")?;
        let belief = GaussianBelief::new(DVector::from_column_slice(slice(mean, n, "mean")?), square(cov, n, "cov")?)?;
        let g = wrap_callback(g, user_data, out_len, "g")?;
        let value = expect(&g, &belief, &scheme, &RngStream::new(seed))?;
        out.copy_from_slice(value.as_slice());
        Ok(())
    })
}

/// Creates a filter with initial belief `N(init_mean, init_cov)`.
///
/// # Safety
/// `model` must be valid, its `q`/`r` arrays must hold `state_dim²` and
/// `obs_dim²` values, `init_cov` `state_dim²` values, and `user_data` must
/// stay valid until the filter is freed.
#[no_mangle]
pub unsafe extern "C" fn srcf_filter_new(
    model: *const SrcfModel,
    scheme: *const SrcfScheme,
    init_mean: *const f64,
    init_cov: *const f64,
    seed: u64,
    out: *mut *mut SrcfFilter,
) -> SrcfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        *out = ptr::null_mut();
        let m = model.as_ref().ok_or_else(|| Failure::null("model"))?;
        let scheme = scheme_from(scheme.as_ref().ok_or_else(|| Failure::null("scheme"))?)?;
        let (n, p) = (m.state_dim, m.obs_dim);
        if n == 0 || p == 0 {
            return Err(Failure::invalid("state_dim and obs_dim must be at least 1"));
        }
        let f = wrap_callback(m.transition, m.user_data, n, "transition")?;
        let h = wrap_callback(m.observation, m.user_data, p, "observation")?;
        let ssm = StateSpaceModel::new(f, h, square(m.q, n, "q")?, square(m.r, p, "r")?)?;
        let init = GaussianBelief::new(
            DVector::from_column_slice(slice(init_mean, n, "init_mean")?),
            square(init_cov, n, "init_cov")?,
        )?;
        let filter = Filter::new(ssm, scheme, init, RngStream::new(seed))?;
        *out = Box::into_raw(Box::new(SrcfFilter { filter }));
        Ok(())
    })
}

/// Processes one observation of length `obs_dim`. After a failure the
/// filter keeps its previous belief.
///
/// # Safety
/// `filter` must be a live handle and `y` must hold `y_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srcf_filter_step(filter: *mut SrcfFilter, y: *const f64, y_len: usize) -> SrcfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(|| Failure::null("filter"))?;
        let p = f.filter.model().obs_dim();
        if y_len != p {
            return Err(Failure::invalid(format!("observation has {y_len} values, model expects {p}")));
        }
        let y = DVector::from_column_slice(slice(y, y_len, "y")?);
        f.filter.step(&y)?;
        Ok(())
    })
}

/// Steps processed so far, or 0 for a null handle.
///
/// # Safety
/// `filter` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srcf_filter_steps(filter: *const SrcfFilter) -> usize {
    filter.as_ref().map_or(0, |f| f.filter.steps_taken())
}

/// Copies the current mean (`state_dim` values).
///
/// # Safety
/// `filter` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srcf_filter_mean(filter: *const SrcfFilter, out: *mut f64, out_len: usize) -> SrcfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| Failure::null("filter"))?;
        let mean = f.filter.belief().mean();
        if out_len != mean.len() {
            return Err(Failure::invalid(format!("mean buffer holds {out_len} values, need {}", mean.len())));
        }
        slice_mut(out, out_len, "out")?.copy_from_slice(mean.as_slice());
        Ok(())
    })
}

/// Copies the current covariance (`state_dim²` values, row-major).
///
/// # Safety
/// `filter` must be a live handle and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srcf_filter_cov(filter: *const SrcfFilter, out: *mut f64, out_len: usize) -> SrcfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| Failure::null("filter"))?;
        let cov = f.filter.belief().cov().as_matrix();
        if out_len != cov.len() {
            return Err(Failure::invalid(format!("cov buffer holds {out_len} values, need {}", cov.len())));
        }
        // symmetric, so column-major equals row-major
        slice_mut(out, out_len, "out")?.copy_from_slice(cov.transpose().as_slice());
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or a handle from [`srcf_filter_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srcf_filter_free(filter: *mut SrcfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}
