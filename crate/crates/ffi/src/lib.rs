//! C ABI for invariant-kit.
//!
//! Every fallible function returns an [`IkStatus`]; on failure a message is
//! stored per thread and can be read with [`ik_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned through `char **` out-parameters are owned by the
//! caller and released with [`ik_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use invariant_kit::cli::{check_mu, run, RunOptions};
use invariant_kit::config::{Problem, ProblemConfig};
use invariant_kit::control::{qp_filter, ControlProblem, FilterOutcome};
use invariant_kit::error::Error;
use invariant_kit::expr::{ExprError, ExprFunction};

/// Result codes shared by every function of the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Domain = 4,
    Dimension = 5,
    InvalidArgument = 6,
    Config = 7,
    Numerical = 8,
    Io = 9,
    Panic = 10,
}

/// A parsed scalar expression.
pub struct IkExpr(ExprFunction);

/// A control-barrier problem built from a config document.
pub struct IkControlProblem(ControlProblem);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

struct Failure(IkStatus, String);

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        let status = match e {
            ExprError::Syntax { .. } | ExprError::UnknownVariable(_) => IkStatus::Parse,
            ExprError::Domain { .. } => IkStatus::Domain,
            ExprError::Arity { .. } => IkStatus::Dimension,
        };
        Failure(status, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Expr(inner) => return inner.clone().into(),
            Error::Dimension(_) | Error::GridMismatch(_) => IkStatus::Dimension,
            Error::Config { .. } => IkStatus::Config,
            Error::Io(_) => IkStatus::Io,
            Error::DomainAtState { .. } => IkStatus::Domain,
            Error::InvalidArgument(_) | Error::EmptyBoundary { .. } => IkStatus::InvalidArgument,
            _ => IkStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: IkStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `body`, turning errors and panics into a status plus a stored message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            IkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IkStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(IkStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(IkStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(IkStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(IkStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(IkStatus::NullPointer, format!("{what} is null")))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).or_else(|_| fail(IkStatus::Numerical, "string contains NUL"))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next API call on the same thread.
#[no_mangle]
pub extern "C" fn ik_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ik_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ik_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `source` over the `n_vars` variable names in `vars`.
///
/// # Safety
/// `source` and each of `vars[0..n_vars]` must be NUL-terminated strings;
/// `out_expr` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ik_expr_parse(
    source: *const c_char,
    vars: *const *const c_char,
    n_vars: usize,
    out_expr: *mut *mut IkExpr,
) -> IkStatus {
    guard(|| {
        let dest = out(out_expr, "out_expr")?;
        *dest = ptr::null_mut();
        let src = text(source, "source")?;
        let names = slice(vars, n_vars, "vars")?
            .iter()
            .map(|p| text(*p, "variable name"))
            .collect::<Result<Vec<_>, _>>()?;
        let e = ExprFunction::parse(src, &names)?;
        *dest = Box::into_raw(Box::new(IkExpr(e)));
        Ok(())
    })
}

/// Number of variables of a parsed expression (0 for null).
///
/// # Safety
/// `expr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ik_expr_arity(expr: *const IkExpr) -> usize {
    expr.as_ref().map_or(0, |e| e.0.variables().len())
}

/// Evaluates the expression at `point[0..n]`.
///
/// # Safety
/// `expr` must be a live handle, `point` readable for `n` values and
/// `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_expr_eval(
    expr: *const IkExpr,
    point: *const f64,
    n: usize,
    out_value: *mut f64,
) -> IkStatus {
    guard(|| {
        let e = expr.as_ref().ok_or_else(|| Failure(IkStatus::NullPointer, "expr is null".into()))?;
        let dest = out(out_value, "out_value")?;
        *dest = e.0.eval(slice(point, n, "point")?)?;
        Ok(())
    })
}

/// Gradient at `point[0..n]` into `out_grad[0..n]`. `out_kink` (optional)
/// is set when the point sits on a kink of abs/min/max/ifpos, in which case
/// the components are one-sided derivatives.
///
/// # Safety
/// `expr` must be a live handle; `point` readable and `out_grad` writable
/// for `n` values; `out_kink` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ik_expr_grad(
    expr: *const IkExpr,
    point: *const f64,
    n: usize,
    out_grad: *mut f64,
    out_kink: *mut bool,
) -> IkStatus {
    guard(|| {
        let e = expr.as_ref().ok_or_else(|| Failure(IkStatus::NullPointer, "expr is null".into()))?;
        let g = e.0.grad(slice(point, n, "point")?)?;
        slice_mut(out_grad, n, "out_grad")?.copy_from_slice(&g.values);
        if let Some(k) = out_kink.as_mut() {
            *k = g.nondifferentiable;
        }
        Ok(())
    })
}

/// Canonical printed form; release with [`ik_string_free`].
///
/// # Safety
/// `expr` must be a live handle and `out_text` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_expr_print(expr: *const IkExpr, out_text: *mut *mut c_char) -> IkStatus {
    guard(|| {
        let e = expr.as_ref().ok_or_else(|| Failure(IkStatus::NullPointer, "expr is null".into()))?;
        *out(out_text, "out_text")? = owned_string(e.0.print())?;
        Ok(())
    })
}

/// Releases an expression handle. Null is ignored.
///
/// # Safety
/// `expr` must come from [`ik_expr_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ik_expr_free(expr: *mut IkExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Classifies μ(w) given as an expression in `w`. `out_exit_code` receives
/// 0 (minimal), 1 (not minimal) or 2 (inconclusive); `out_json` (optional)
/// the verdict with its evidence.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out_exit_code` writable;
/// `out_json` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ik_classify_mu(
    source: *const c_char,
    locally_lipschitz: bool,
    divergent_integral: bool,
    out_exit_code: *mut i32,
    out_json: *mut *mut c_char,
) -> IkStatus {
    guard(|| {
        let code = out(out_exit_code, "out_exit_code")?;
        let (c, json) = check_mu(text(source, "source")?, locally_lipschitz, divergent_integral)?;
        *code = c;
        if let Some(j) = out_json.as_mut() {
            *j = owned_string(json)?;
        }
        Ok(())
    })
}

/// Builds a control problem from a config document of kind "mcbf".
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out_problem` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_control_problem_from_json(
    config_json: *const c_char,
    out_problem: *mut *mut IkControlProblem,
) -> IkStatus {
    guard(|| {
        let dest = out(out_problem, "out_problem")?;
        *dest = ptr::null_mut();
        let cfg = ProblemConfig::from_json(text(config_json, "config_json")?, "<config>")?;
        match cfg.build("<config>")? {
            Problem::Mcbf(p) => {
                *dest = Box::into_raw(Box::new(IkControlProblem(p)));
                Ok(())
            }
            _ => fail(IkStatus::Config, "config kind must be \"mcbf\""),
        }
    })
}

/// State and input dimensions of a control problem.
///
/// # Safety
/// `problem` must be a live handle; the out-pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn ik_control_problem_dims(
    problem: *const IkControlProblem,
    out_state_dim: *mut usize,
    out_input_dim: *mut usize,
) -> IkStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| Failure(IkStatus::NullPointer, "problem is null".into()))?;
        if let Some(n) = out_state_dim.as_mut() {
            *n = p.0.state_dim();
        }
        if let Some(m) = out_input_dim.as_mut() {
            *m = p.0.input_dim();
        }
        Ok(())
    })
}

/// Evaluates the safety filter at `x[0..n]`. On success `out_feasible`
/// says whether the admissible input set is nonempty; if it is, the
/// filtered input is written to `out_u[0..m]`.
///
/// # Safety
/// `problem` must be a live handle; `x` readable for `n` values, `out_u`
/// writable for `m` values and `out_feasible` writable.
#[no_mangle]
pub unsafe extern "C" fn ik_qp_filter(
    problem: *const IkControlProblem,
    x: *const f64,
    n: usize,
    out_u: *mut f64,
    m: usize,
    out_feasible: *mut bool,
) -> IkStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| Failure(IkStatus::NullPointer, "problem is null".into()))?;
        let feasible = out(out_feasible, "out_feasible")?;
        if n != p.0.state_dim() || m != p.0.input_dim() {
            return fail(
                IkStatus::Dimension,
                format!("expected n = {}, m = {}", p.0.state_dim(), p.0.input_dim()),
            );
        }
        let r = qp_filter(&p.0, slice(x, n, "x")?)?;
        match &r.outcome {
            FilterOutcome::Solved { u, .. } => {
                slice_mut(out_u, m, "out_u")?.copy_from_slice(u);
                *feasible = true;
            }
            FilterOutcome::Infeasible { .. } => *feasible = false,
        }
        Ok(())
    })
}

/// Releases a control problem handle. Null is ignored.
///
/// # Safety
/// `problem` must come from [`ik_control_problem_from_json`] and not have
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn ik_control_problem_free(problem: *mut IkControlProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs every job of the config file at `config_path`, like the `run`
/// command. `out_dir` may be null to use the config's default. Receives
/// the run's exit code and, optionally, the report path.
///
/// # Safety
/// `config_path` must be a NUL-terminated string, `out_dir` null or one;
/// `out_exit_code` writable; `out_report_path` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ik_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    out_exit_code: *mut i32,
    out_report_path: *mut *mut c_char,
) -> IkStatus {
    guard(|| {
        let code = out(out_exit_code, "out_exit_code")?;
        let dir = if out_dir.is_null() { None } else { Some(PathBuf::from(text(out_dir, "out_dir")?)) };
        let outcome = run(Path::new(text(config_path, "config_path")?), &RunOptions { out_dir: dir, seed })?;
        *code = outcome.exit_code;
        if let Some(p) = out_report_path.as_mut() {
            *p = owned_string(outcome.report_path.display().to_string())?;
        }
        Ok(())
    })
}
