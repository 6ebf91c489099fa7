//! C ABI for the bpiree solvers.
//!
//! Problems and results are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns a
//! [`BpireeErrorCode`]; on failure a message is kept per thread and can be
//! read with [`bpiree_last_error_message`]. Panics never cross the boundary.
//!
//! Indices are 0-based and dense matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use bpiree::algo::Algorithm;
use bpiree::instance::InstanceData;
use bpiree::model::{BlockPartition, LeastSquares, Penalty, Problem};
use bpiree::prox::prox_weighted_abs;
use bpiree::{Error, SolveOutput, SolverConfig, Status};

/// Return codes of every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpireeErrorCode {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Numerical = 5,
    Unsupported = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Termination status of a solver run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpireeSolveStatus {
    Converged = 0,
    MaxIter = 1,
    NumericalFailure = 2,
}

/// Penalty family for [`bpiree_problem_new_least_squares`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpireePenaltyKind {
    /// `λ Σ log(1 + |x_j|/ε̄)`; `param` is `ε̄`.
    Log = 0,
    /// `λ Σ (|x_j| + ε_j²)^p`; `param` is `p`.
    SmoothedLp = 1,
}

/// Opaque problem handle.
pub struct BpireeProblem {
    inner: Problem,
}

/// Opaque result handle.
pub struct BpireeResult {
    inner: SolveOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn code_of(err: &Error) -> BpireeErrorCode {
    match err {
        Error::InvalidArgument(_) => BpireeErrorCode::InvalidArgument,
        Error::NumericalFailure { .. } => BpireeErrorCode::Numerical,
        Error::Unsupported(_) => BpireeErrorCode::Unsupported,
        Error::Io(_) => BpireeErrorCode::Io,
        Error::Parse(_) => BpireeErrorCode::Parse,
    }
}

fn fail(code: BpireeErrorCode, message: impl Into<String>) -> BpireeErrorCode {
    set_last_error(message.into());
    code
}

/// Run `f`, translating errors and panics into codes.
fn guard(f: impl FnOnce() -> Result<(), (BpireeErrorCode, String)>) -> BpireeErrorCode {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BpireeErrorCode::Ok,
        Ok(Err((code, msg))) => fail(code, msg),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_owned());
            fail(BpireeErrorCode::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift(err: Error) -> (BpireeErrorCode, String) {
    (code_of(&err), err.to_string())
}

fn null(what: &str) -> (BpireeErrorCode, String) {
    (BpireeErrorCode::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BpireeErrorCode, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (BpireeErrorCode::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (BpireeErrorCode, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next bpiree call on the same thread.
#[no_mangle]
pub extern "C" fn bpiree_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bpiree_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a problem from instance JSON. Blob paths resolve against `base_dir`
/// (NULL means the current directory).
///
/// # Safety
/// `json` and a non-NULL `base_dir` must be NUL-terminated strings; `out`
/// must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn bpiree_problem_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut BpireeProblem,
) -> BpireeErrorCode {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let dir = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let data = InstanceData::from_json(text, Path::new(dir)).map_err(lift)?;
        let problem = data.to_problem().map_err(lift)?;
        store(out, BpireeProblem { inner: problem });
        Ok(())
    })
}

/// Load a problem from an instance JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bpiree_problem_load(path: *const c_char, out: *mut *mut BpireeProblem) -> BpireeErrorCode {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let data = InstanceData::read(Path::new(path)).map_err(lift)?;
        let problem = data.to_problem().map_err(lift)?;
        store(out, BpireeProblem { inner: problem });
        Ok(())
    })
}

/// Build `½‖Ax − b‖² + penalty` from raw arrays, with `num_blocks` contiguous
/// blocks. `a` is `rows × cols` row-major, `b` has `rows` entries.
///
/// # Safety
/// `a` must hold `rows * cols` doubles, `b` must hold `rows` doubles and
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bpiree_problem_new_least_squares(
    a: *const f64,
    rows: usize,
    cols: usize,
    b: *const f64,
    num_blocks: usize,
    penalty: BpireePenaltyKind,
    lambda: f64,
    param: f64,
    out: *mut *mut BpireeProblem,
) -> BpireeErrorCode {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len =
            rows.checked_mul(cols).ok_or((BpireeErrorCode::InvalidArgument, "rows * cols overflows".to_owned()))?;
        if len == 0 {
            return Err((BpireeErrorCode::InvalidArgument, "A must be nonempty".to_owned()));
        }
        let a = slice_arg(a, len, "a")?;
        let b = slice_arg(b, rows, "b")?;
        let matrix = bpiree::linalg::from_row_major(rows, cols, a.to_vec()).map_err(lift)?;
        let loss = LeastSquares::new(matrix, b.to_vec()).map_err(lift)?;
        let penalty = match penalty {
            BpireePenaltyKind::Log => Penalty::log(lambda, param),
            BpireePenaltyKind::SmoothedLp => Penalty::smoothed_lp(lambda, param),
        }
        .map_err(lift)?;
        let partition = BlockPartition::contiguous(cols, num_blocks).map_err(lift)?;
        let problem = Problem::new(Arc::new(loss), penalty, partition).map_err(lift)?;
        store(out, BpireeProblem { inner: problem });
        Ok(())
    })
}

/// Number of unknowns, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_problem_dim(problem: *const BpireeProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// Number of blocks, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_problem_num_blocks(problem: *const BpireeProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.partition().num_blocks())
}

/// Evaluate the objective at `x`. Smoothed ℓp problems need `eps` (same
/// length as `x`); other penalties ignore it and accept NULL.
///
/// # Safety
/// `x` must hold `len` doubles; a non-NULL `eps` must hold `len` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bpiree_problem_objective(
    problem: *const BpireeProblem,
    x: *const f64,
    eps: *const f64,
    len: usize,
    out: *mut f64,
) -> BpireeErrorCode {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice_arg(x, len, "x")?;
        let eps = if eps.is_null() { None } else { Some(slice_arg(eps, len, "eps")?) };
        *out = p.inner.objective(x, eps).map_err(lift)?;
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bpiree_problem_free(problem: *mut BpireeProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Run the solver named `algo` ("bpiree", "bpiree-lp", "pire", "pire-ps",
/// "pire-au", "irl1", "irl1e1"). `config_json` holds solver settings (NULL
/// for defaults); `x0` may be NULL to start from the origin.
///
/// # Safety
/// `algo` and a non-NULL `config_json` must be NUL-terminated; a non-NULL
/// `x0` must hold `x0_len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bpiree_solve(
    problem: *const BpireeProblem,
    algo: *const c_char,
    config_json: *const c_char,
    x0: *const f64,
    x0_len: usize,
    out: *mut *mut BpireeResult,
) -> BpireeErrorCode {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let algo: Algorithm = str_arg(algo, "algo")?.parse().map_err(lift)?;
        let config: SolverConfig = if config_json.is_null() {
            SolverConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)
                .map_err(|e| (BpireeErrorCode::Parse, format!("solver config: {e}")))?
        };
        let start = if x0.is_null() { vec![0.0; p.inner.dim()] } else { slice_arg(x0, x0_len, "x0")?.to_vec() };
        let output = algo.run(&p.inner, &config, &start).map_err(lift)?;
        store(out, BpireeResult { inner: output });
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a live handle. NULL reports a numerical failure.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_status(result: *const BpireeResult) -> BpireeSolveStatus {
    match result.as_ref().map(|r| r.inner.status) {
        Some(Status::Converged) => BpireeSolveStatus::Converged,
        Some(Status::MaxIter) => BpireeSolveStatus::MaxIter,
        Some(Status::NumericalFailure) | None => BpireeSolveStatus::NumericalFailure,
    }
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_iterations(result: *const BpireeResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.iterations)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_objective(result: *const BpireeResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.objective)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_rel_step(result: *const BpireeResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.rel_step)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_residual(result: *const BpireeResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.residual)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_dim(result: *const BpireeResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.x.len())
}

/// Copy the final point into `buf`, which must hold at least
/// `bpiree_result_dim(result)` doubles.
///
/// # Safety
/// `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_copy_x(
    result: *const BpireeResult,
    buf: *mut f64,
    len: usize,
) -> BpireeErrorCode {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let x = &r.inner.x;
        if len < x.len() {
            return Err((BpireeErrorCode::BufferTooSmall, format!("buffer holds {len} values, need {}", x.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(x.as_ptr(), buf, x.len());
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bpiree_result_free(result: *mut BpireeResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Soft threshold `argmin_x τ|x| + ½(x − v)²`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bpiree_prox_weighted_abs(v: f64, tau: f64, out: *mut f64) -> BpireeErrorCode {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = prox_weighted_abs(v, tau).map_err(lift)?;
        Ok(())
    })
}
