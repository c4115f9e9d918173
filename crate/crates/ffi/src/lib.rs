//! C ABI over `awls-rpca`.
//!
//! Matrices and results are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Fallible calls return an
//! `AwlsStatus` and write their output through an out-pointer; on failure the
//! out-pointer is left untouched and `awls_last_error` describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use awls_rpca::io::{load_matrix, save_matrix, MatrixFormat};
use awls_rpca::{
    rmse, solve, DecompositionResult, DenseMatrix, Error, Init, SolverConfig, SynthInstance, SynthSpec,
    Termination, Variant,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwlsStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    NotPositiveDefinite = 3,
    Parameter = 4,
    Domain = 5,
    NonFinite = 6,
    Format = 7,
    Io = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwlsVariant {
    L2 = 0,
    L0 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwlsInit {
    PowerIteration = 0,
    GaussianRandom = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwlsTermination {
    Converged = 0,
    MaxIter = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwlsFormat {
    Csv = 0,
    Mat1 = 1,
}

/// Solver parameters. Start from `awls_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwlsConfig {
    pub rank: usize,
    pub lambda: f64,
    pub prox_t: f64,
    pub p: f64,
    pub variant: AwlsVariant,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub init: AwlsInit,
}

/// Opaque dense row-major matrix.
pub struct AwlsMatrix {
    inner: DenseMatrix,
}

/// Opaque decomposition result.
pub struct AwlsResult {
    inner: DecompositionResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> AwlsStatus {
    match err {
        Error::Shape { .. } => AwlsStatus::Shape,
        Error::NotPositiveDefinite { .. } => AwlsStatus::NotPositiveDefinite,
        Error::Parameter(_) => AwlsStatus::Parameter,
        Error::Domain(_) => AwlsStatus::Domain,
        Error::NonFinite { .. } => AwlsStatus::NonFinite,
        Error::Format { .. } => AwlsStatus::Format,
        Error::Io(_) => AwlsStatus::Io,
    }
}

fn fail(status: AwlsStatus, msg: impl Into<String>) -> AwlsStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), AwlsStatus>) -> AwlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AwlsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(AwlsStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, AwlsStatus>;
}

impl<T> OrStatus<T> for Result<T, Error> {
    fn or_status(self) -> Result<T, AwlsStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, AwlsStatus> {
    p.as_ref().ok_or_else(|| fail(AwlsStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), AwlsStatus> {
    if p.is_null() {
        Err(fail(AwlsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, AwlsStatus> {
    if p.is_null() {
        return Err(fail(AwlsStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(AwlsStatus::InvalidUtf8, "path is not valid UTF-8"))
}

fn boxed_matrix(m: DenseMatrix) -> *mut AwlsMatrix {
    Box::into_raw(Box::new(AwlsMatrix { inner: m }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn awls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn awls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn awls_config_default() -> AwlsConfig {
    config_to_c(&SolverConfig::default())
}

fn config_to_c(c: &SolverConfig) -> AwlsConfig {
    AwlsConfig {
        rank: c.rank,
        lambda: c.lambda,
        prox_t: c.prox_t,
        p: c.p,
        variant: match c.variant {
            Variant::L2 => AwlsVariant::L2,
            Variant::L0 => AwlsVariant::L0,
        },
        max_iter: c.max_iter,
        tol: c.tol,
        seed: c.seed,
        init: match c.init {
            Init::PowerIteration => AwlsInit::PowerIteration,
            Init::GaussianRandom => AwlsInit::GaussianRandom,
        },
    }
}

fn config_from_c(c: &AwlsConfig) -> SolverConfig {
    SolverConfig {
        rank: c.rank,
        lambda: c.lambda,
        prox_t: c.prox_t,
        p: c.p,
        variant: match c.variant {
            AwlsVariant::L2 => Variant::L2,
            AwlsVariant::L0 => Variant::L0,
        },
        max_iter: c.max_iter,
        tol: c.tol,
        seed: c.seed,
        init: match c.init {
            AwlsInit::PowerIteration => Init::PowerIteration,
            AwlsInit::GaussianRandom => Init::GaussianRandom,
        },
    }
}

/// Creates a `rows x cols` matrix from `rows * cols` row-major values, or a
/// zero matrix when `data` is NULL.
///
/// # Safety
/// `data` must be NULL or point to `rows * cols` readable doubles; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut AwlsMatrix,
) -> AwlsStatus {
    guard(|| {
        check_out(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(AwlsStatus::Parameter, "rows * cols overflows"))?;
        let values = if data.is_null() {
            vec![0.0; len]
        } else {
            std::slice::from_raw_parts(data, len).to_vec()
        };
        let m = DenseMatrix::from_vec(rows, cols, values).or_status()?;
        *out = boxed_matrix(m);
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_free(m: *mut AwlsMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_rows(m: *const AwlsMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// Column count, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_cols(m: *const AwlsMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the row-major values into `out`, which must hold exactly `len`
/// doubles with `len == rows * cols`.
///
/// # Safety
/// `m` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_copy_data(m: *const AwlsMatrix, out: *mut f64, len: usize) -> AwlsStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        check_out(out, "out")?;
        let src = m.inner.as_slice();
        if len != src.len() {
            return Err(fail(
                AwlsStatus::Shape,
                format!("buffer holds {len} values, matrix has {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
        Ok(())
    })
}

/// Reads a CSV or MAT1 file (detected from its contents).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_read(path: *const c_char, out: *mut *mut AwlsMatrix) -> AwlsStatus {
    guard(|| {
        check_out(out, "out")?;
        let m = load_matrix(path_arg(path)?).or_status()?;
        *out = boxed_matrix(m);
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn awls_matrix_write(
    m: *const AwlsMatrix,
    path: *const c_char,
    format: AwlsFormat,
) -> AwlsStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let format = match format {
            AwlsFormat::Csv => MatrixFormat::Csv,
            AwlsFormat::Mat1 => MatrixFormat::Mat1,
        };
        save_matrix(&m.inner, path_arg(path)?, format).or_status()
    })
}

/// Decomposes `y`. Release the result with `awls_result_free`.
///
/// # Safety
/// `y` must be a live handle, `config` a valid pointer and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn awls_solve(
    y: *const AwlsMatrix,
    config: *const AwlsConfig,
    out: *mut *mut AwlsResult,
) -> AwlsStatus {
    guard(|| {
        let y = deref(y, "y")?;
        let config = config_from_c(deref(config, "config")?);
        check_out(out, "out")?;
        let result = solve(&y.inner, &config).or_status()?;
        *out = Box::into_raw(Box::new(AwlsResult { inner: result }));
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn awls_result_free(r: *mut AwlsResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Iterations run, or 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn awls_result_iterations(r: *const AwlsResult) -> usize {
    r.as_ref().map_or(0, |r| r.inner.iterations)
}

/// # Safety
/// `r` must be a live result handle.
#[no_mangle]
pub unsafe extern "C" fn awls_result_termination(r: *const AwlsResult) -> AwlsTermination {
    match r.as_ref().map(|r| r.inner.termination) {
        Some(Termination::Converged) => AwlsTermination::Converged,
        _ => AwlsTermination::MaxIter,
    }
}

/// Final objective value, or NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn awls_result_objective(r: *const AwlsResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.inner.final_objective())
}

/// Which matrix of a result to extract.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwlsComponent {
    /// `U V`
    LowRank = 0,
    Sparse = 1,
    Weights = 2,
    U = 3,
    V = 4,
}

/// Copies one component of a result into a new matrix handle.
///
/// # Safety
/// `r` must be a live result handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn awls_result_component(
    r: *const AwlsResult,
    component: AwlsComponent,
    out: *mut *mut AwlsMatrix,
) -> AwlsStatus {
    guard(|| {
        let r = &deref(r, "result")?.inner;
        check_out(out, "out")?;
        let m = match component {
            AwlsComponent::LowRank => r.low_rank().or_status()?,
            AwlsComponent::Sparse => r.sparse.clone(),
            AwlsComponent::Weights => r.weights.weights().clone(),
            AwlsComponent::U => r.factors.u.clone(),
            AwlsComponent::V => r.factors.v.clone(),
        };
        *out = boxed_matrix(m);
        Ok(())
    })
}

/// Root mean square difference of two equally sized matrices.
///
/// # Safety
/// `a` and `b` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn awls_rmse(a: *const AwlsMatrix, b: *const AwlsMatrix, out: *mut f64) -> AwlsStatus {
    guard(|| {
        let (a, b) = (deref(a, "a")?, deref(b, "b")?);
        check_out(out, "out")?;
        *out = rmse(&a.inner, &b.inner).or_status()?;
        Ok(())
    })
}

/// Generates `Y = X + S` with rank-`rank` `X` (0 selects `m / 50`) and
/// Bernoulli(`sparsity`) outliers at the given log10 SNR. Any of the out
/// pointers may be NULL to skip that matrix.
///
/// # Safety
/// Out pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn awls_synth_generate(
    m: usize,
    n: usize,
    rank: usize,
    sparsity: f64,
    snr: f64,
    seed: u64,
    out_y: *mut *mut AwlsMatrix,
    out_x: *mut *mut AwlsMatrix,
    out_s: *mut *mut AwlsMatrix,
) -> AwlsStatus {
    guard(|| {
        let mut spec = SynthSpec::new(m, n, sparsity, snr, seed);
        if rank > 0 {
            spec.rank = rank;
        }
        let inst = SynthInstance::generate(&spec).or_status()?;
        for (out, value) in [(out_y, inst.y), (out_x, inst.x_true), (out_s, inst.s_true)] {
            if !out.is_null() {
                *out = boxed_matrix(value);
            }
        }
        Ok(())
    })
}
