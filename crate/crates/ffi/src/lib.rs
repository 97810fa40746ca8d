//! C interface to `pdflow`.
//!
//! Every object crosses the boundary as an opaque handle owned by the caller
//! and released with its `*_free` function. Fallible calls return a
//! [`PdflowStatus`]; on failure [`pdflow_last_error`] describes what went
//! wrong on the calling thread. Strings returned by the library are
//! NUL-terminated and released with [`pdflow_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pdflow::bounds::gamma_sup;
use pdflow::cli::{self, ExperimentConfig, RunOutput};
use pdflow::symdsl::{GridSpec, MatrixSymbol};
use pdflow::Error;

/// Result of a fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdflowStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Config = 4,
    Grid = 5,
    Precondition = 6,
    Numerical = 7,
    Unsupported = 8,
    Io = 9,
    Panic = 10,
}

/// A parsed matrix symbol.
pub struct PdflowSymbol(MatrixSymbol);

/// A validated experiment config.
pub struct PdflowConfig(ExperimentConfig);

/// The outcome of a run: report, series and timings.
pub struct PdflowReport(RunOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PdflowStatus {
    match e {
        Error::Parse { .. } | Error::NonPeriodic(_) | Error::Format(_) => PdflowStatus::Parse,
        Error::Config(_) => PdflowStatus::Config,
        Error::Grid(_) | Error::CutoffTooSmall { .. } | Error::Shape(_) => PdflowStatus::Grid,
        Error::Precondition(_) | Error::Guard(_) | Error::DegenerateSweep(_) | Error::OrderExceeded { .. } => PdflowStatus::Precondition,
        Error::NonFinite(_) | Error::SpectralGap { .. } => PdflowStatus::Numerical,
        Error::Unsupported(_) => PdflowStatus::Unsupported,
        Error::Io(_) | Error::Json(_) => PdflowStatus::Io,
    }
}

/// Runs `f`, recording any error or panic for [`pdflow_last_error`].
fn guarded(f: impl FnOnce() -> Result<(), (PdflowStatus, String)>) -> PdflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdflowStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg =
                p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PdflowStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (PdflowStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PdflowStatus, String) {
    (PdflowStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PdflowStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PdflowStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pdflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pdflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pdflow_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an `n × n` symbol in `d` space dimensions with declared order `order`.
///
/// # Safety
/// `src` is a NUL-terminated string and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pdflow_symbol_parse(src: *const c_char, d: usize, order: f64, out: *mut *mut PdflowSymbol) -> PdflowStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(src, "src")?;
        let m = MatrixSymbol::parse(text, d, order).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PdflowSymbol(m)));
        Ok(())
    })
}

/// # Safety
/// `sym` is NULL or a handle from [`pdflow_symbol_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pdflow_symbol_free(sym: *mut PdflowSymbol) {
    if !sym.is_null() {
        drop(Box::from_raw(sym));
    }
}

/// Matrix size `n`, or 0 for NULL.
///
/// # Safety
/// `sym` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdflow_symbol_size(sym: *const PdflowSymbol) -> usize {
    sym.as_ref().map_or(0, |s| s.0.n())
}

/// Space dimension `d`, or 0 for NULL.
///
/// # Safety
/// `sym` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdflow_symbol_dim(sym: *const PdflowSymbol) -> usize {
    sym.as_ref().map_or(0, |s| s.0.d())
}

/// Evaluates `M(x, ξ; t)` into row-major `re`/`im`, each of length `n²`.
///
/// # Safety
/// `x` and `xi` hold `d` values; `re` and `im` hold `n²` writable values.
#[no_mangle]
pub unsafe extern "C" fn pdflow_symbol_eval(
    sym: *const PdflowSymbol,
    x: *const f64,
    xi: *const f64,
    t: f64,
    re: *mut f64,
    im: *mut f64,
) -> PdflowStatus {
    guarded(|| {
        let s = sym.as_ref().ok_or_else(|| null("sym"))?;
        if x.is_null() || xi.is_null() || re.is_null() || im.is_null() {
            return Err(null("an argument array"));
        }
        let d = s.0.d();
        let v = s.0.eval(std::slice::from_raw_parts(x, d), std::slice::from_raw_parts(xi, d), t);
        for (i, z) in v.iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// Spectral and numerical-range growth rates of the symbol on a grid.
///
/// # Safety
/// `sym` is a live handle; `gamma_spec` and `gamma_garding` are writable.
#[no_mangle]
pub unsafe extern "C" fn pdflow_symbol_rates(
    sym: *const PdflowSymbol,
    n_x: usize,
    k_max: usize,
    eps: f64,
    gamma_spec: *mut f64,
    gamma_garding: *mut f64,
) -> PdflowStatus {
    guarded(|| {
        let s = sym.as_ref().ok_or_else(|| null("sym"))?;
        if gamma_spec.is_null() || gamma_garding.is_null() {
            return Err(null("an output pointer"));
        }
        let g = GridSpec::new(s.0.d(), n_x, k_max, eps).map_err(lib_err)?;
        let r = gamma_sup(&s.0, &g);
        *gamma_spec = r.gamma_spec;
        *gamma_garding = r.gamma_garding;
        Ok(())
    })
}

/// Validates config text. Relative `symbol_file` paths resolve against
/// `base_dir`, or the working directory when `base_dir` is NULL.
///
/// # Safety
/// `text` is a NUL-terminated string, `base_dir` is NULL or one, and `out`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn pdflow_config_validate(text: *const c_char, base_dir: *const c_char, out: *mut *mut PdflowConfig) -> PdflowStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(text, "text")?;
        let base = if base_dir.is_null() { "." } else { read_str(base_dir, "base_dir")? };
        let cfg = cli::validate(text, std::path::Path::new(base)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PdflowConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` is NULL or a handle from [`pdflow_config_validate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pdflow_config_free(cfg: *mut PdflowConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Normalized config text with defaults filled in; free with
/// [`pdflow_string_free`]. NULL for a NULL handle.
///
/// # Safety
/// `cfg` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdflow_config_echo(cfg: *const PdflowConfig) -> *mut c_char {
    cfg.as_ref().map_or(ptr::null_mut(), |c| into_c_string(c.0.to_text()))
}

/// Runs the experiment on `workers` threads (0 picks the default).
///
/// # Safety
/// `cfg` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pdflow_run(cfg: *const PdflowConfig, workers: usize, out: *mut *mut PdflowReport) -> PdflowStatus {
    guarded(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = cli::with_workers((workers > 0).then_some(workers), || cli::run(&c.0)).map_err(lib_err)?.map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PdflowReport(r)));
        Ok(())
    })
}

/// # Safety
/// `rep` is NULL or a handle from [`pdflow_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pdflow_report_free(rep: *mut PdflowReport) {
    if !rep.is_null() {
        drop(Box::from_raw(rep));
    }
}

/// 1 if every check passed, 0 otherwise or for NULL.
///
/// # Safety
/// `rep` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdflow_report_pass(rep: *const PdflowReport) -> i32 {
    rep.as_ref().map_or(0, |r| r.0.report.pass as i32)
}

/// The report as JSON, excluding timings; free with [`pdflow_string_free`].
///
/// # Safety
/// `rep` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pdflow_report_json(rep: *const PdflowReport) -> *mut c_char {
    let Some(r) = rep.as_ref() else {
        set_error("rep is null".into());
        return ptr::null_mut();
    };
    match cli::report_json(&r.0.report) {
        Ok(s) => into_c_string(s),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Writes `report.json`, `series/*.csv` and `timings.json` into `dir`.
///
/// # Safety
/// `rep` is a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn pdflow_report_write(rep: *const PdflowReport, dir: *const c_char) -> PdflowStatus {
    guarded(|| {
        let r = rep.as_ref().ok_or_else(|| null("rep"))?;
        let dir = read_str(dir, "dir")?;
        cli::write_outputs(&r.0, std::path::Path::new(dir)).map_err(lib_err)
    })
}
