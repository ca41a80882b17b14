//! C ABI over the xorflow solver.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns an
//! [`XfStatus`]; on failure [`xf_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use xorflow::engine::{Engine, RoundConfig};
use xorflow::netmodel::{parse_instance, ConstantParams, ProblemInstance};
use xorflow::solution::{solution_from_json, solution_to_json, verify, SolutionVariables};
use xorflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON or an instance that fails validation.
    InvalidInput = 3,
    /// Rejected configuration, e.g. epsilon out of range.
    InvalidConfig = 4,
    /// Index out of range, or a solution naming unknown nodes or links.
    UnknownIndex = 5,
    Internal = 6,
    Panic = 7,
}

/// Parsed problem instance.
pub struct XfInstance {
    inner: ProblemInstance,
}

/// Result of a completed run.
pub struct XfRun {
    instance: ProblemInstance,
    solution: SolutionVariables,
    achieved: Vec<f64>,
    converged: bool,
    rounds: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XfRunConfig {
    pub epsilon: f64,
    pub kappa: f64,
    /// 0 selects the default `N - 1`.
    pub big_l: u32,
    /// 0 selects the default `4 (N - 1)`.
    pub big_f: u32,
    pub max_rounds: u64,
    /// Values `<= 0` select epsilon.
    pub stop_fraction: f64,
    pub fast_index: bool,
    pub routing_only: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> XfStatus {
    match err {
        Error::Json(_)
        | Error::Io(_)
        | Error::DanglingNode(_)
        | Error::DuplicateNode(_)
        | Error::UnknownLink(_)
        | Error::InvalidLink(_)
        | Error::NonPositiveRate { .. }
        | Error::DegenerateSession(_)
        | Error::NegativeCapacity(_)
        | Error::EmptyRateSets
        | Error::ModeMismatch(_)
        | Error::UnknownFixture(_) => XfStatus::InvalidInput,
        Error::EpsilonOutOfRange(_) | Error::InvalidConfig(_) | Error::ZeroRounds => XfStatus::InvalidConfig,
        Error::UnknownIndex(_) | Error::OffGrid { .. } => XfStatus::UnknownIndex,
        Error::SearchTooLarge { .. } | Error::InvariantBreach(_) => XfStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), XfStatus>) -> XfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => XfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside xorflow");
            XfStatus::Panic
        }
    }
}

fn fail(err: Error) -> XfStatus {
    set_error(err.to_string());
    status_of(&err)
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, XfStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(XfStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        XfStatus::InvalidUtf8
    })
}

fn null(what: &str) -> XfStatus {
    set_error(format!("null {what}"));
    XfStatus::NullPointer
}

/// Message for the last failed call on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn xf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xf_instance_parse(json: *const c_char, out: *mut *mut XfInstance) -> XfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = ptr::null_mut();
        let text = read_str(json)?;
        let inst = parse_instance(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(XfInstance { inner: inst }));
        Ok(())
    })
}

/// # Safety
/// `inst` must come from [`xf_instance_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn xf_instance_free(inst: *mut XfInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

#[no_mangle]
pub extern "C" fn xf_run_config_default() -> XfRunConfig {
    let cfg = RoundConfig::default();
    XfRunConfig {
        epsilon: cfg.constants.epsilon,
        kappa: cfg.constants.kappa,
        big_l: 0,
        big_f: 0,
        max_rounds: cfg.max_rounds as u64,
        stop_fraction: 0.0,
        fast_index: cfg.fast_index,
        routing_only: cfg.routing_only,
    }
}

fn round_config(c: &XfRunConfig) -> RoundConfig {
    let opt = |v: u32| (v > 0).then_some(v as usize);
    RoundConfig {
        constants: ConstantParams { epsilon: c.epsilon, big_l: opt(c.big_l), big_f: opt(c.big_f), kappa: c.kappa },
        max_rounds: c.max_rounds.min(usize::MAX as u64) as usize,
        stop_fraction: (c.stop_fraction > 0.0).then_some(c.stop_fraction),
        fast_index: c.fast_index,
        routing_only: c.routing_only,
        stats_every: 0,
        ..RoundConfig::default()
    }
}

/// Runs to convergence or `max_rounds`. A run that does not converge still
/// succeeds; query [`xf_run_converged`].
///
/// # Safety
/// `inst` must be a live instance handle, `config` may be null for
/// defaults, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xf_run(inst: *const XfInstance, config: *const XfRunConfig, out: *mut *mut XfRun) -> XfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = ptr::null_mut();
        let inst = inst.as_ref().ok_or_else(|| null("instance"))?;
        let cfg = config.as_ref().copied().unwrap_or_else(|| xf_run_config_default());
        let mut engine = Engine::new(&inst.inner, round_config(&cfg)).map_err(fail)?;
        let converged = engine.run_to_end().map_err(fail)?;
        let achieved = engine.achieved_rates();
        let rounds = engine.rounds() as u64;
        let solution = engine.solution().map_err(fail)?;
        *out = Box::into_raw(Box::new(XfRun { instance: inst.inner.clone(), solution, achieved, converged, rounds }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`xf_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn xf_run_free(run: *mut XfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live run handle or null (reported as not converged).
#[no_mangle]
pub unsafe extern "C" fn xf_run_converged(run: *const XfRun) -> bool {
    run.as_ref().is_some_and(|r| r.converged)
}

/// # Safety
/// `run` must be a live run handle or null (reported as 0).
#[no_mangle]
pub unsafe extern "C" fn xf_run_rounds(run: *const XfRun) -> u64 {
    run.as_ref().map_or(0, |r| r.rounds)
}

/// # Safety
/// `run` must be a live run handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xf_run_achieved_rate(run: *const XfRun, session: usize, out: *mut f64) -> XfStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = *run.achieved.get(session).ok_or_else(|| fail(Error::UnknownIndex(format!("session {session}"))))?;
        Ok(())
    })
}

/// Solution variables as JSON. Release the string with [`xf_string_free`].
///
/// # Safety
/// `run` must be a live run handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xf_run_solution_json(run: *const XfRun, out: *mut *mut c_char) -> XfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = ptr::null_mut();
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let text = solution_to_json(&run.instance, &run.solution);
        *out = CString::new(text).map_err(|_| fail(Error::InvariantBreach("NUL in JSON".into())))?.into_raw();
        Ok(())
    })
}

/// Verifies a solution JSON against the instance using the rates recorded
/// in the solution. `tolerance <= 0` selects `0.1 * min rate`.
///
/// # Safety
/// `inst` must be a live instance handle, `solution_json` a NUL-terminated
/// string, and `pass` / `max_residual` writable (either may be null).
#[no_mangle]
pub unsafe extern "C" fn xf_verify(
    inst: *const XfInstance,
    solution_json: *const c_char,
    tolerance: f64,
    pass: *mut bool,
    max_residual: *mut f64,
) -> XfStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("instance"))?;
        let text = read_str(solution_json)?;
        let sol = solution_from_json(&inst.inner, text).map_err(fail)?;
        let tol = if tolerance > 0.0 { tolerance } else { xorflow::solution::default_tolerance(&inst.inner, 0.1) };
        let report = verify(&inst.inner, &sol, &sol.rates, tol).map_err(fail)?;
        if let Some(p) = pass.as_mut() {
            *p = report.pass;
        }
        if let Some(m) = max_residual.as_mut() {
            *m = report.max_residual;
        }
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn xf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
