//! C ABI for the kernel ridge regression library.
//!
//! Conventions: every fallible call returns an [`NskrrStatus`] and writes
//! results through out-pointers; handles are opaque and must be released
//! with their matching `_free` function; a thread-local message describing
//! the most recent error is available from [`nskrr_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use nonstat_krr::config::Config;
use nonstat_krr::error::Error;
use nonstat_krr::experiment::Scenario;
use nonstat_krr::kernels::{Interval, Kernel};
use nonstat_krr::krr::{Dataset, GammaSchedule, KrrModel};

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NskrrStatus {
    Ok = 0,
    /// A structurally invalid argument (bad range, dimension mismatch).
    ErrArgument = 1,
    /// An input outside the kernel domain or density support.
    ErrDomain = 2,
    /// A numeric failure (factorization breakdown, degenerate data).
    ErrNumeric = 3,
    /// Configuration text failed to parse or validate.
    ErrConfig = 4,
    /// Filesystem failure while writing artifacts.
    ErrIo = 5,
    /// A required pointer was null, or a handle was already consumed.
    ErrNull = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> NskrrStatus {
    match err {
        Error::Argument(_) => NskrrStatus::ErrArgument,
        Error::Domain(_) => NskrrStatus::ErrDomain,
        Error::Numeric(_) | Error::Singularity(_) => NskrrStatus::ErrNumeric,
        Error::Config(_) => NskrrStatus::ErrConfig,
        Error::Io(_) => NskrrStatus::ErrIo,
    }
}

fn fail(err: Error) -> NskrrStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null_fail(what: &str) -> NskrrStatus {
    set_error(&format!("{what} must not be null"));
    NskrrStatus::ErrNull
}

/// Message describing the most recent error on this thread. The pointer
/// stays valid until the next failing call on the same thread; do not free
/// it.
#[no_mangle]
pub extern "C" fn nskrr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque kernel handle.
pub struct NskrrKernel {
    inner: Kernel,
}

/// Opaque estimator handle. A failed `nskrr_model_extend` consumes the
/// model; the handle then reports `NSKRR_ERR_NULL` until freed.
pub struct NskrrModel {
    inner: Option<KrrModel>,
}

/// Opaque scenario handle carrying a parsed configuration.
pub struct NskrrScenario {
    config: Config,
    scenario: Scenario,
}

unsafe fn write_out<T>(out: *mut T, value: T) {
    if !out.is_null() {
        unsafe { out.write(value) };
    }
}

/// Create a Gaussian kernel `exp(-((x-a)/width)^2)` on `[lo, hi]`.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn nskrr_kernel_gaussian(
    width: f64,
    lo: f64,
    hi: f64,
    out: *mut *mut NskrrKernel,
) -> NskrrStatus {
    if out.is_null() {
        return null_fail("out");
    }
    let kernel = Interval::new(lo, hi).and_then(|domain| Kernel::gaussian(width, domain));
    match kernel {
        Ok(inner) => {
            unsafe { write_out(out, Box::into_raw(Box::new(NskrrKernel { inner }))) };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Create a spline kernel of order 1 or 2 on `[lo, hi]`.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn nskrr_kernel_spline(
    order: u8,
    lo: f64,
    hi: f64,
    out: *mut *mut NskrrKernel,
) -> NskrrStatus {
    if out.is_null() {
        return null_fail("out");
    }
    let kernel = Interval::new(lo, hi).and_then(|domain| Kernel::spline(order, domain));
    match kernel {
        Ok(inner) => {
            unsafe { write_out(out, Box::into_raw(Box::new(NskrrKernel { inner }))) };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Create a periodic kernel (truncated cosine expansion) on `[lo, hi]`.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn nskrr_kernel_periodic(
    period: f64,
    harmonics: u32,
    lo: f64,
    hi: f64,
    out: *mut *mut NskrrKernel,
) -> NskrrStatus {
    if out.is_null() {
        return null_fail("out");
    }
    let kernel =
        Interval::new(lo, hi).and_then(|domain| Kernel::periodic(period, harmonics, domain));
    match kernel {
        Ok(inner) => {
            unsafe { write_out(out, Box::into_raw(Box::new(NskrrKernel { inner }))) };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Evaluate `K(x, a)`.
///
/// # Safety
/// `kernel` must be a live handle from a `nskrr_kernel_*` constructor and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nskrr_kernel_eval(
    kernel: *const NskrrKernel,
    x: f64,
    a: f64,
    out: *mut f64,
) -> NskrrStatus {
    if kernel.is_null() {
        return null_fail("kernel");
    }
    if out.is_null() {
        return null_fail("out");
    }
    match unsafe { &*kernel }.inner.eval(x, a) {
        Ok(v) => {
            unsafe { write_out(out, v) };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a kernel handle. Null is accepted.
///
/// # Safety
/// `kernel` must have come from a `nskrr_kernel_*` constructor and must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nskrr_kernel_free(kernel: *mut NskrrKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// The regularization schedule value `gamma0 * t^{-alpha}`; enforces
/// `gamma0 > 0` and `0 < alpha < 1/2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nskrr_gamma_at(
    gamma0: f64,
    alpha: f64,
    t: usize,
    out: *mut f64,
) -> NskrrStatus {
    if out.is_null() {
        return null_fail("out");
    }
    if t == 0 {
        set_error("t must be >= 1");
        return NskrrStatus::ErrArgument;
    }
    match GammaSchedule::new(gamma0, alpha) {
        Ok(s) => {
            unsafe { write_out(out, s.gamma_at(t)) };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Fit the ridge estimator on `len` samples.
///
/// # Safety
/// `kernel` must be live, `xs` and `ys` must point to `len` readable
/// doubles, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nskrr_model_fit(
    kernel: *const NskrrKernel,
    xs: *const f64,
    ys: *const f64,
    len: usize,
    gamma: f64,
    out: *mut *mut NskrrModel,
) -> NskrrStatus {
    if kernel.is_null() {
        return null_fail("kernel");
    }
    if xs.is_null() || ys.is_null() {
        return null_fail("xs/ys");
    }
    if out.is_null() {
        return null_fail("out");
    }
    let xs = unsafe { std::slice::from_raw_parts(xs, len) };
    let ys = unsafe { std::slice::from_raw_parts(ys, len) };
    let result = Dataset::new(xs.to_vec(), ys.to_vec())
        .and_then(|data| KrrModel::fit(&data, &unsafe { &*kernel }.inner, gamma));
    match result {
        Ok(model) => {
            unsafe {
                write_out(
                    out,
                    Box::into_raw(Box::new(NskrrModel {
                        inner: Some(model),
                    })),
                )
            };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Empty model for streaming use; extend it one sample at a time.
///
/// # Safety
/// `kernel` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nskrr_model_empty(
    kernel: *const NskrrKernel,
    out: *mut *mut NskrrModel,
) -> NskrrStatus {
    if kernel.is_null() {
        return null_fail("kernel");
    }
    if out.is_null() {
        return null_fail("out");
    }
    let model = KrrModel::empty(unsafe { &*kernel }.inner.clone());
    unsafe {
        write_out(
            out,
            Box::into_raw(Box::new(NskrrModel {
                inner: Some(model),
            })),
        )
    };
    NskrrStatus::Ok
}

/// Append one observation under the new regularization, updating the model
/// in place.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nskrr_model_extend(
    model: *mut NskrrModel,
    x: f64,
    y: f64,
    gamma: f64,
) -> NskrrStatus {
    if model.is_null() {
        return null_fail("model");
    }
    let handle = unsafe { &mut *model };
    let Some(current) = handle.inner.take() else {
        return null_fail("model (already consumed by a failed extend)");
    };
    match current.extend(x, y, gamma) {
        Ok(next) => {
            handle.inner = Some(next);
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Evaluate the estimate at `x`.
///
/// # Safety
/// `model` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn nskrr_model_predict(
    model: *const NskrrModel,
    x: f64,
    out: *mut f64,
) -> NskrrStatus {
    if model.is_null() {
        return null_fail("model");
    }
    if out.is_null() {
        return null_fail("out");
    }
    let Some(inner) = unsafe { &*model }.inner.as_ref() else {
        return null_fail("model (already consumed by a failed extend)");
    };
    match inner.predict(x) {
        Ok(v) => {
            unsafe { write_out(out, v) };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Number of support points in the model; zero for a null or consumed
/// handle.
///
/// # Safety
/// `model`, when non-null, must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nskrr_model_len(model: *const NskrrModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }
        .inner
        .as_ref()
        .map(|m| m.len())
        .unwrap_or(0)
}

/// Release a model handle. Null is accepted.
///
/// # Safety
/// `model` must have come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nskrr_model_free(model: *mut NskrrModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Parse a scenario from TOML text.
///
/// # Safety
/// `toml_text` must be a NUL-terminated C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nskrr_scenario_parse(
    toml_text: *const c_char,
    out: *mut *mut NskrrScenario,
) -> NskrrStatus {
    if toml_text.is_null() {
        return null_fail("toml_text");
    }
    if out.is_null() {
        return null_fail("out");
    }
    let text = match unsafe { CStr::from_ptr(toml_text) }.to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("configuration text is not valid UTF-8");
            return NskrrStatus::ErrConfig;
        }
    };
    let result = Config::from_toml(text).and_then(|config| {
        let scenario = config.to_scenario()?;
        Ok((config, scenario))
    });
    match result {
        Ok((config, scenario)) => {
            unsafe {
                write_out(
                    out,
                    Box::into_raw(Box::new(NskrrScenario { config, scenario })),
                )
            };
            NskrrStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Total number of samples the scenario's schedule generates.
///
/// # Safety
/// `scenario`, when non-null, must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nskrr_scenario_total(scenario: *const NskrrScenario) -> usize {
    if scenario.is_null() {
        return 0;
    }
    unsafe { &*scenario }.scenario.schedule.total()
}

/// Run the scenario and write report.csv, summary.json, and the grid CSV
/// artifacts into `out_dir` (overriding the configured output directory).
///
/// # Safety
/// `scenario` must be live and `out_dir` a NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn nskrr_scenario_run(
    scenario: *const NskrrScenario,
    out_dir: *const c_char,
) -> NskrrStatus {
    if scenario.is_null() {
        return null_fail("scenario");
    }
    if out_dir.is_null() {
        return null_fail("out_dir");
    }
    let dir = match unsafe { CStr::from_ptr(out_dir) }.to_str() {
        Ok(d) => d,
        Err(_) => {
            set_error("out_dir is not valid UTF-8");
            return NskrrStatus::ErrArgument;
        }
    };
    let handle = unsafe { &*scenario };
    let mut config = handle.config.clone();
    config.output.directory = dir.to_string();
    match nonstat_krr::cli::run_and_write(&config, &handle.scenario, Path::new(dir)) {
        Ok(_) => NskrrStatus::Ok,
        Err(e) => fail(e),
    }
}

/// Release a scenario handle. Null is accepted.
///
/// # Safety
/// `scenario` must have come from `nskrr_scenario_parse` and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nskrr_scenario_free(scenario: *mut NskrrScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}
