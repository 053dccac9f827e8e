//! C ABI for `floquet_delta`.
//!
//! Every entry point returns an `FdStatus`. On failure the message is kept
//! per thread and can be read with `fd_last_error_message`. Panics never
//! cross the boundary; they come back as `FD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use floquet_delta::cli::parse_psi0;
use floquet_delta::resonances::{find_resonances, FindOptions, Resonance};
use floquet_delta::timedomain::{PsiEvaluator, TimeDomainOptions};
use floquet_delta::wronskian::wronskian;
use floquet_delta::{Complex64, FloquetError, InitialWavefunction, ModelParams, PotentialKind, SheetConfig};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    VerticalCut = 3,
    NotFound = 4,
    NoConvergence = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

/// Values accepted by the `potential` argument of `fd_model_new`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdPotential {
    Well = 0,
    Barrier = 1,
}

/// One refined zero of the Wronskian.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FdResonance {
    pub z_re: f64,
    pub z_im: f64,
    pub p_re: f64,
    pub p_im: f64,
    /// -Re p.
    pub gamma: f64,
    /// 1 on the physical sheet.
    pub visible: i32,
    pub newton_residual: f64,
}

/// psi(x, t) and its three parts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FdPsi {
    pub re: f64,
    pub im: f64,
    pub gamow_re: f64,
    pub gamow_im: f64,
    pub cut_re: f64,
    pub cut_im: f64,
    pub f_re: f64,
    pub f_im: f64,
}

/// Opaque model handle: parameters, sheet and initial data.
pub struct FdModel {
    params: ModelParams,
    sheet: SheetConfig,
    psi0: InitialWavefunction,
    theta: Option<f64>,
    evaluator: Option<PsiEvaluator>,
}

/// Opaque list of resonances returned by `fd_find_resonances`.
pub struct FdResonanceList {
    items: Vec<FdResonance>,
    count: i64,
    consistent: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &FloquetError) -> FdStatus {
    match err {
        FloquetError::InvalidParameter(_) | FloquetError::SheetMismatch(_) => FdStatus::InvalidParameter,
        FloquetError::VerticalCut(_) => FdStatus::VerticalCut,
        FloquetError::NotFound(_) => FdStatus::NotFound,
        FloquetError::NoConvergence(_) | FloquetError::Divergence(_) | FloquetError::Quadrature(_) => {
            FdStatus::NoConvergence
        }
        FloquetError::Io(_) => FdStatus::Io,
        _ => FdStatus::Numerical,
    }
}

struct Fail(FdStatus, String);

impl From<FloquetError> for Fail {
    fn from(e: FloquetError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            FdStatus::Panic
        }
    }
}

unsafe fn model_mut<'a>(model: *mut FdModel) -> Result<&'a mut FdModel, Fail> {
    model.as_mut().ok_or_else(|| null("model"))
}

unsafe fn model_ref<'a>(model: *const FdModel) -> Result<&'a FdModel, Fail> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(FdStatus::InvalidParameter, format!("{what} is not valid UTF-8")))
}

impl FdModel {
    fn replace_psi0(&mut self, psi0: InitialWavefunction) {
        self.psi0 = psi0;
        self.evaluator = None;
    }

    fn evaluator(&mut self) -> Result<&PsiEvaluator, Fail> {
        if self.evaluator.is_none() {
            let mut opts = TimeDomainOptions::default();
            if let Some(theta) = self.theta {
                opts.theta = theta;
            }
            self.evaluator = Some(PsiEvaluator::new(&self.params, &self.psi0, &self.sheet, &opts)?);
        }
        Ok(self.evaluator.as_ref().expect("just built"))
    }
}

fn to_c(res: &Resonance) -> FdResonance {
    FdResonance {
        z_re: res.z_star.re,
        z_im: res.z_star.im,
        p_re: res.p_star.re,
        p_im: res.p_star.im,
        gamma: res.gamma,
        visible: res.visible as i32,
        newton_residual: res.newton_residual,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread ("" after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New model on the usual sheet with initial data bump:1.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fd_model_new(omega: f64, r: f64, potential: i32, out: *mut *mut FdModel) -> FdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let kind = match potential {
            p if p == FdPotential::Well as i32 => PotentialKind::Well,
            p if p == FdPotential::Barrier as i32 => PotentialKind::Barrier,
            p => return Err(Fail(FdStatus::InvalidParameter, format!("unknown potential {p}"))),
        };
        let params = ModelParams::new(omega, r, kind)?;
        let model = FdModel {
            params,
            sheet: SheetConfig::usual(),
            psi0: InitialWavefunction::poly_bump(1.0)?,
            theta: None,
            evaluator: None,
        };
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from `fd_model_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fd_model_free(model: *mut FdModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Select the sheet, e.g. "usual", "flip:0", "theta=0.2;flip:-1".
///
/// # Safety
/// `model` must be a live handle and `spec` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fd_model_set_sheet(model: *mut FdModel, spec: *const c_char) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        let spec = str_arg(spec, "spec")?;
        m.sheet = SheetConfig::parse(spec)?;
        m.evaluator = None;
        Ok(())
    })
}

/// Tilt of the cut rays used by `fd_psi`. NaN restores the default.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_model_set_theta(model: *mut FdModel, theta: f64) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        m.theta = (!theta.is_nan()).then_some(theta);
        m.evaluator = None;
        Ok(())
    })
}

/// Initial data from a compact spec such as "bump:1" or "exp:1:12".
///
/// # Safety
/// `model` must be a live handle and `spec` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fd_model_set_psi0(model: *mut FdModel, spec: *const c_char) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        let spec = str_arg(spec, "spec")?;
        m.replace_psi0(parse_psi0(spec)?);
        Ok(())
    })
}

/// psi0(x) = (1 - (x/M)^2)^2 on [-M, M].
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_model_set_poly_bump(model: *mut FdModel, support: f64) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        m.replace_psi0(InitialWavefunction::poly_bump(support)?);
        Ok(())
    })
}

/// psi0(x) = exp(-rate |x|) cut off at |x| = M.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_model_set_truncated_exponential(model: *mut FdModel, rate: f64, support: f64) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        m.replace_psi0(InitialWavefunction::truncated_exponential(rate, support)?);
        Ok(())
    })
}

/// Natural cubic spline through (knots[i], re[i] + i im[i]); zero outside.
/// `im` may be null for real data.
///
/// # Safety
/// `model` must be a live handle; `knots` and `re` (and `im` if not null)
/// must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn fd_model_set_piecewise_cubic(
    model: *mut FdModel,
    knots: *const f64,
    re: *const f64,
    im: *const f64,
    len: usize,
) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        if knots.is_null() || re.is_null() {
            return Err(null("knots or values"));
        }
        let xs = std::slice::from_raw_parts(knots, len).to_vec();
        let re = std::slice::from_raw_parts(re, len);
        let values = if im.is_null() {
            re.iter().map(|&v| Complex64::new(v, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, len);
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
        };
        m.replace_psi0(InitialWavefunction::piecewise_cubic(xs, values)?);
        Ok(())
    })
}

/// Discrete Wronskian W(z) on the model's sheet.
///
/// # Safety
/// `model` must be a live handle; `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_wronskian(
    model: *const FdModel,
    z_re: f64,
    z_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> FdStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let w = wronskian(Complex64::new(z_re, z_im), &m.params, &m.sheet)?;
        *out_re = w.w.re;
        *out_im = w.w.im;
        Ok(())
    })
}

/// All zeros of W in the default region of the model's sheet.
/// An empty list is a success; check `fd_resonance_list_len`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_find_resonances(model: *const FdModel, out: *mut *mut FdResonanceList) -> FdStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let found = find_resonances(&m.params, &m.sheet, &FindOptions::default())?;
        let list = FdResonanceList {
            items: found.resonances.iter().map(to_c).collect(),
            count: found.count,
            consistent: found.consistent,
        };
        *out = Box::into_raw(Box::new(list));
        Ok(())
    })
}

/// Number of refined zeros in the list (0 for null).
///
/// # Safety
/// `list` must be null or a live list handle.
#[no_mangle]
pub unsafe extern "C" fn fd_resonance_list_len(list: *const FdResonanceList) -> usize {
    list.as_ref().map_or(0, |l| l.items.len())
}

/// Argument-principle zero count; equals the length when the search was consistent.
///
/// # Safety
/// `list` must be null or a live list handle.
#[no_mangle]
pub unsafe extern "C" fn fd_resonance_list_count(list: *const FdResonanceList) -> i64 {
    list.as_ref().map_or(0, |l| l.count)
}

/// 1 when every counted zero was refined.
///
/// # Safety
/// `list` must be null or a live list handle.
#[no_mangle]
pub unsafe extern "C" fn fd_resonance_list_consistent(list: *const FdResonanceList) -> i32 {
    list.as_ref().map_or(0, |l| l.consistent as i32)
}

/// Copy entry `index` into `out`.
///
/// # Safety
/// `list` must be a live list handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_resonance_list_get(
    list: *const FdResonanceList,
    index: usize,
    out: *mut FdResonance,
) -> FdStatus {
    guard(|| {
        let l = list.as_ref().ok_or_else(|| null("list"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let item = l.items.get(index).ok_or_else(|| {
            Fail(
                FdStatus::InvalidParameter,
                format!("index {index} out of range for {} resonances", l.items.len()),
            )
        })?;
        *out = *item;
        Ok(())
    })
}

/// Release a list. Null is ignored.
///
/// # Safety
/// `list` must come from `fd_find_resonances` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fd_resonance_list_free(list: *mut FdResonanceList) {
    if !list.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(list))));
    }
}

/// psi(x, t) from the resonance expansion. The model's sheet must be the
/// physical one. Resonances and residues are cached on the handle until the
/// sheet, theta or initial data change.
///
/// # Safety
/// `model` must be a live handle, not shared across threads during the
/// call, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_psi(model: *mut FdModel, x: f64, t: f64, out: *mut FdPsi) -> FdStatus {
    guard(|| {
        let m = model_mut(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = m.evaluator()?.eval(x, t)?;
        *out = FdPsi {
            re: d.total.re,
            im: d.total.im,
            gamow_re: d.gamow.re,
            gamow_im: d.gamow.im,
            cut_re: d.cut_sum.re,
            cut_im: d.cut_sum.im,
            f_re: d.f_term.re,
            f_im: d.f_term.im,
        };
        Ok(())
    })
}
