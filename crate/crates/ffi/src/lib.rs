//! C ABI for `photon-recon`.
//!
//! Every fallible function returns a [`PrStatus`]. On failure a human-readable
//! message is kept per thread and can be fetched with [`pr_last_error_message`].
//! Response matrices are handed out as opaque [`PrResponse`] pointers owned by
//! the caller and released with [`pr_response_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use photon_recon::estimation::{em_reconstruct, linear_baseline, BinCounts, EmConfig};
use photon_recon::quadrature::{fock_loss_density, response_matrix, BinGrid, OverflowMode, ResponseMatrix};
use photon_recon::sim::{bin_events, sample_gaussian_route};
use photon_recon::states::StateKind;
use photon_recon::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Validation = 3,
    DimensionMismatch = 4,
    Infeasible = 5,
    RankDeficient = 6,
    Numerical = 7,
    Parse = 8,
    Io = 9,
    /// A caller-provided buffer has the wrong length.
    BufferSize = 10,
    /// A Rust panic was caught at the boundary.
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrOverflow {
    Include = 0,
    Discard = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrState {
    Coherent = 0,
    SqueezedVacuum = 1,
}

/// Opaque response matrix.
pub struct PrResponse {
    inner: ResponseMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PrStatus {
    match e {
        Error::Domain(_) => PrStatus::Domain,
        Error::Validation(_) => PrStatus::Validation,
        Error::DimensionMismatch(_) => PrStatus::DimensionMismatch,
        Error::Infeasible { .. } => PrStatus::Infeasible,
        Error::RankDeficient { .. } => PrStatus::RankDeficient,
        Error::Numerical(_) => PrStatus::Numerical,
        Error::Parse { .. } => PrStatus::Parse,
        Error::Io(_) | Error::Json(_) => PrStatus::Io,
    }
}

/// Failure raised inside the boundary before it becomes a status code.
enum Fail {
    Lib(Error),
    Status(PrStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PrStatus::Ok
        }
        Ok(Err(Fail::Lib(e))) => {
            let status = status_of(&e);
            set_error(e.to_string());
            status
        }
        Ok(Err(Fail::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            PrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(PrStatus::NullPointer, format!("{what} is null"))
}

fn index(n: i32, what: &str) -> Result<usize, Fail> {
    usize::try_from(n).map_err(|_| Fail::Lib(Error::Domain(format!("{what} must be >= 0, got {n}"))))
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Fail::Status(PrStatus::BufferSize, format!("{what} holds {len} values, expected {expected}")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn response<'a>(handle: *const PrResponse) -> Result<&'a ResponseMatrix, Fail> {
    handle.as_ref().map(|h| &h.inner).ok_or_else(|| null("response handle"))
}

/// Copies the last error message of this thread into `buf` as a NUL-terminated string.
///
/// Returns the buffer size needed for the full message including the terminator.
/// Passing a null `buf` or zero `len` only queries that size.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Quadrature density of Fock state `n` after loss with efficiency `eta`.
///
/// # Safety
/// `out` must point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn pr_fock_loss_density(n: i32, eta: f64, q: f64, out: *mut f64) -> PrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = fock_loss_density(index(n, "photon number")?, eta, q)?;
        Ok(())
    })
}

/// Builds the response matrix for photon numbers `0..=n_max` on a uniform grid.
///
/// # Safety
/// `out` must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_response_new(
    q_min: f64,
    q_max: f64,
    n_bins: usize,
    overflow: PrOverflow,
    n_max: i32,
    eta: f64,
    out: *mut *mut PrResponse,
) -> PrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match overflow {
            PrOverflow::Include => OverflowMode::Include,
            PrOverflow::Discard => OverflowMode::Discard,
        };
        let grid = BinGrid::new(q_min, q_max, n_bins, mode)?;
        let inner = response_matrix(&grid, index(n_max, "n_max")?, eta)?;
        *out = Box::into_raw(Box::new(PrResponse { inner }));
        Ok(())
    })
}

/// Reads a response matrix written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_response_read(path: *const c_char, out: *mut *mut PrResponse) -> PrStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail::Lib(Error::Validation("path is not valid UTF-8".into())))?;
        let inner = ResponseMatrix::read_file(path)?;
        *out = Box::into_raw(Box::new(PrResponse { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must be null or come from a constructor of this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pr_response_free(handle: *mut PrResponse) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of model rows (bins, including overflow slots in include mode) and columns (`n_max + 1`).
///
/// # Safety
/// `handle` must be a live handle; `rows` and `cols` must point to writable `size_t`s.
#[no_mangle]
pub unsafe extern "C" fn pr_response_dims(handle: *const PrResponse, rows: *mut usize, cols: *mut usize) -> PrStatus {
    guard(|| {
        let a = response(handle)?;
        *rows.as_mut().ok_or_else(|| null("rows"))? = a.n_rows();
        *cols.as_mut().ok_or_else(|| null("cols"))? = a.n_cols();
        Ok(())
    })
}

/// Copies the entries in row-major order into `buf`, which must hold exactly `rows * cols` values.
///
/// # Safety
/// `handle` must be a live handle; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pr_response_copy_entries(handle: *const PrResponse, buf: *mut f64, len: usize) -> PrStatus {
    guard(|| {
        let a = response(handle)?;
        let out = out_slice(buf, len, a.n_rows() * a.n_cols(), "entry buffer")?;
        for (r, chunk) in out.chunks_exact_mut(a.n_cols()).enumerate() {
            chunk.copy_from_slice(a.row(r));
        }
        Ok(())
    })
}

/// Simulates `n_events` homodyne events of a benchmark state and bins them on the handle's grid.
///
/// `counts` receives one value per model row.
///
/// # Safety
/// `handle` must be a live handle; `counts` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pr_simulate_counts(
    handle: *const PrResponse,
    state: PrState,
    mean_photon: f64,
    n_events: usize,
    seed: u64,
    counts: *mut f64,
    len: usize,
) -> PrStatus {
    guard(|| {
        let a = response(handle)?;
        let out = out_slice(counts, len, a.n_rows(), "count buffer")?;
        let kind = match state {
            PrState::Coherent => StateKind::Coherent,
            PrState::SqueezedVacuum => StateKind::SqueezedVacuum,
        };
        let batch = sample_gaussian_route(kind, mean_photon, a.eta(), n_events, seed)?;
        for (o, k) in out.iter_mut().zip(bin_events(&batch, a.grid()).model_counts()) {
            *o = k as f64;
        }
        Ok(())
    })
}

/// Runs `iterations` EM steps from the uniform distribution.
///
/// `counts` holds one value per model row; `rho` receives `n_max + 1` values.
/// `kkt_residual` may be null.
///
/// # Safety
/// `handle` must be a live handle; `counts` must point to `n_counts` readable doubles;
/// `rho` to `rho_len` writable doubles; `kkt_residual` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pr_em_reconstruct(
    handle: *const PrResponse,
    counts: *const f64,
    n_counts: usize,
    iterations: usize,
    rho: *mut f64,
    rho_len: usize,
    kkt_residual: *mut f64,
) -> PrStatus {
    guard(|| {
        let a = response(handle)?;
        let data = read_counts(a, counts, n_counts)?;
        let out = out_slice(rho, rho_len, a.n_cols(), "rho buffer")?;
        let config = EmConfig { n_max: a.n_max(), max_iterations: iterations, ..EmConfig::default() };
        let result = em_reconstruct(&data, a, &config)?;
        out.copy_from_slice(result.estimate.probs());
        if let Some(k) = kkt_residual.as_mut() {
            *k = result.kkt_residual;
        }
        Ok(())
    })
}

/// Unconstrained least-squares estimate and its standard errors; both buffers hold `n_max + 1` values.
///
/// # Safety
/// As [`pr_em_reconstruct`]; `std_errors` may be null.
#[no_mangle]
pub unsafe extern "C" fn pr_linear_baseline(
    handle: *const PrResponse,
    counts: *const f64,
    n_counts: usize,
    values: *mut f64,
    std_errors: *mut f64,
    len: usize,
) -> PrStatus {
    guard(|| {
        let a = response(handle)?;
        let data = read_counts(a, counts, n_counts)?;
        let out = out_slice(values, len, a.n_cols(), "value buffer")?;
        let est = linear_baseline(&data, a)?;
        out.copy_from_slice(&est.values);
        if !std_errors.is_null() {
            out_slice(std_errors, len, a.n_cols(), "standard error buffer")?.copy_from_slice(&est.std_errors);
        }
        Ok(())
    })
}

unsafe fn read_counts(a: &ResponseMatrix, counts: *const f64, n: usize) -> Result<BinCounts, Fail> {
    if counts.is_null() {
        return Err(null("counts"));
    }
    if n != a.n_rows() {
        return Err(Fail::Lib(Error::DimensionMismatch(format!(
            "{n} counts supplied but the response matrix has {} rows",
            a.n_rows()
        ))));
    }
    Ok(BinCounts::new(std::slice::from_raw_parts(counts, n).to_vec())?)
}
