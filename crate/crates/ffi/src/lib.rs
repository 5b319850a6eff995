//! C ABI for `tropical-ot`.
//!
//! Every function returns a [`TropStatus`]; results go through out-pointers.
//! On failure a message is kept per thread and can be read with
//! [`trop_last_error_message`]. Solutions are opaque handles released with
//! the matching `*_free` function. Grids are 2-D with `nx * ny` cells stored
//! row-major, x slowest (`index = i * ny + j`); densities are per-cell masses.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tropical_ot::grid::{DensityField, GridSpec};
use tropical_ot::solver::SolverConfig;
use tropical_ot::w1::{solve_w1, W1Problem, W1Solution};
use tropical_ot::w2::{solve_w2, W2Solution};
use tropical_ot::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TropStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Infeasible = 4,
    Degenerate = 5,
    NoRoot = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TropStatus {
    match e {
        Error::DimensionMismatch { .. } => TropStatus::DimensionMismatch,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Format(_) => TropStatus::InvalidArgument,
        Error::DegenerateInput(_) => TropStatus::Degenerate,
        Error::Infeasible { .. } | Error::Unreachable { .. } => TropStatus::Infeasible,
        Error::NoNonnegativeRoot { .. } => TropStatus::NoRoot,
        Error::Io(_) => TropStatus::Io,
    }
}

enum Fail {
    Status(TropStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn null() -> Fail {
    Fail::Status(TropStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TropStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TropStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TropStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(null)
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail::Status(
            TropStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null());
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length plus one,
/// or 0 when there is no message.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn trop_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn trop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Tropical distance between two points of `n` coordinates.
///
/// # Safety
/// `x` and `y` must hold `n` values; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_dist(x: *const f64, y: *const f64, n: usize, result: *mut f64) -> TropStatus {
    guard(|| {
        *out(result)? = tropical_ot::trop::trop_dist(slice(x, n)?, slice(y, n)?)?;
        Ok(())
    })
}

/// Tropical norm of a vector of `n` components.
///
/// # Safety
/// `a` must hold `n` values; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_norm(a: *const f64, n: usize, result: *mut f64) -> TropStatus {
    guard(|| {
        *out(result)? = tropical_ot::trop::trop_norm(slice(a, n)?);
        Ok(())
    })
}

/// Largest absolute subset sum of `b`.
///
/// # Safety
/// `b` must hold `n` values; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_zeta(b: *const f64, n: usize, result: *mut f64) -> TropStatus {
    guard(|| {
        *out(result)? = tropical_ot::trop::zeta(slice(b, n)?);
        Ok(())
    })
}

/// Hamiltonian `H(b)` for exponent `p`; `+inf` is written as `INFINITY`.
///
/// # Safety
/// `b` must hold `n` values; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_hamiltonian(b: *const f64, n: usize, p: f64, result: *mut f64) -> TropStatus {
    guard(|| {
        let b = slice(b, n)?;
        if !(p >= 1.0) {
            return Err(Fail::Status(TropStatus::InvalidArgument, format!("p must be at least 1, got {p}")));
        }
        *out(result)? = tropical_ot::trop::hamiltonian(b, p).to_f64();
        Ok(())
    })
}

/// Tropical shrink of `b` with step `h`, written to `result` (`n` values).
///
/// # Safety
/// `b` and `result` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn trop_shrink(b: *const f64, n: usize, h: f64, result: *mut f64) -> TropStatus {
    guard(|| {
        let v = tropical_ot::prox::shrink_tr(slice(b, n)?, h)?;
        copy_out(&v, result, n)
    })
}

/// Minimizer of `(mu/2)||m||_tr^2 + |m - c|^2/2` for 2-D `c`.
///
/// # Safety
/// `c` must hold 2 values; `result` must hold 2 values.
#[no_mangle]
pub unsafe extern "C" fn trop_flux_project(c: *const f64, mu: f64, result: *mut f64) -> TropStatus {
    guard(|| {
        let c = slice(c, 2)?;
        let m = tropical_ot::prox::flux_project_f([c[0], c[1]], mu)?;
        copy_out(&m, result, 2)
    })
}

/// Largest nonnegative root of `x^3 + a2 x^2 + a1 x + a0`.
///
/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_root_pos_cubic(a2: f64, a1: f64, a0: f64, result: *mut f64) -> TropStatus {
    guard(|| {
        *out(result)? = tropical_ot::prox::root_pos_cubic(a2, a1, a0)?;
        Ok(())
    })
}

/// Solver parameters. Steps `<= 0` are derived from the operator norm.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TropSolverConfig {
    pub tolerance: f64,
    pub max_iter: u64,
    pub primal_step: f64,
    pub dual_step: f64,
    pub step_safety: f64,
    pub step_balance: f64,
    pub time_slices: u64,
    pub seed: u64,
    pub power_iterations: u64,
}

impl From<&SolverConfig> for TropSolverConfig {
    fn from(c: &SolverConfig) -> Self {
        TropSolverConfig {
            tolerance: c.tolerance,
            max_iter: c.max_iter as u64,
            primal_step: c.primal_step.unwrap_or(0.0),
            dual_step: c.dual_step.unwrap_or(0.0),
            step_safety: c.step_safety,
            step_balance: c.step_balance,
            time_slices: c.time_slices as u64,
            seed: c.seed,
            power_iterations: c.power_iterations as u64,
        }
    }
}

impl TropSolverConfig {
    fn to_config(self) -> SolverConfig {
        let step = |s: f64| if s > 0.0 { Some(s) } else { None };
        SolverConfig {
            tolerance: self.tolerance,
            max_iter: self.max_iter as usize,
            primal_step: step(self.primal_step),
            dual_step: step(self.dual_step),
            step_safety: self.step_safety,
            step_balance: self.step_balance,
            time_slices: self.time_slices as usize,
            seed: self.seed,
            power_iterations: self.power_iterations as usize,
            ..SolverConfig::w1_default()
        }
    }
}

/// Defaults for the Wasserstein-1 solver.
///
/// # Safety
/// `cfg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_config_default_w1(cfg: *mut TropSolverConfig) -> TropStatus {
    guard(|| {
        *out(cfg)? = (&SolverConfig::w1_default()).into();
        Ok(())
    })
}

/// Defaults for the Wasserstein-2 solver.
///
/// # Safety
/// `cfg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_config_default_w2(cfg: *mut TropSolverConfig) -> TropStatus {
    guard(|| {
        *out(cfg)? = (&SolverConfig::w2_default()).into();
        Ok(())
    })
}

unsafe fn densities(
    nx: usize,
    ny: usize,
    dx: f64,
    q0: *const f64,
    q1: *const f64,
) -> Result<(DensityField, DensityField), Fail> {
    let grid = GridSpec::new(vec![nx, ny], dx)?;
    let n = grid.num_cells();
    let a = DensityField::new(grid.clone(), slice(q0, n)?.to_vec())?;
    let b = DensityField::new(grid, slice(q1, n)?.to_vec())?;
    Ok((a, b))
}

unsafe fn config(cfg: *const TropSolverConfig) -> Result<SolverConfig, Fail> {
    Ok(cfg.as_ref().ok_or_else(null)?.to_config())
}

/// Opaque Wasserstein-1 result.
pub struct TropW1Solution {
    inner: W1Solution,
}

/// Opaque Wasserstein-2 result.
pub struct TropW2Solution {
    inner: W2Solution,
}

/// Solves the Wasserstein-1 problem between per-cell masses `q0`, `q1` on an
/// `nx x ny` grid of spacing `dx`. On success `*solution` owns a handle.
///
/// # Safety
/// `q0`, `q1` must hold `nx * ny` values; `cfg` must be valid; `solution`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_w1_solve(
    nx: usize,
    ny: usize,
    dx: f64,
    q0: *const f64,
    q1: *const f64,
    cfg: *const TropSolverConfig,
    solution: *mut *mut TropW1Solution,
) -> TropStatus {
    guard(|| {
        let slot = out(solution)?;
        *slot = ptr::null_mut();
        let (a, b) = densities(nx, ny, dx, q0, q1)?;
        let sol = solve_w1(&W1Problem::new(a, b)?, &config(cfg)?)?;
        *slot = Box::into_raw(Box::new(TropW1Solution { inner: sol }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`trop_w1_solve`]; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_w1_distance(s: *const TropW1Solution, result: *mut f64) -> TropStatus {
    guard(|| {
        *out(result)? = s.as_ref().ok_or_else(null)?.inner.distance;
        Ok(())
    })
}

/// Iteration count and convergence flag.
///
/// # Safety
/// `s` must come from [`trop_w1_solve`]; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_w1_status(s: *const TropW1Solution, iterations: *mut u64, converged: *mut bool) -> TropStatus {
    guard(|| {
        let r = &s.as_ref().ok_or_else(null)?.inner.report;
        *out(iterations)? = r.iterations as u64;
        *out(converged)? = r.converged;
        Ok(())
    })
}

/// Flux component `axis` (0 = x, 1 = y) in the cell-aligned layout: entry
/// `i` is the flux through the upper face of cell `i` along `axis`.
///
/// # Safety
/// `s` must come from [`trop_w1_solve`]; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn trop_w1_flux(s: *const TropW1Solution, axis: usize, buf: *mut f64, len: usize) -> TropStatus {
    guard(|| {
        let m = &s.as_ref().ok_or_else(null)?.inner.m;
        if axis >= m.components().len() {
            return Err(Fail::Status(TropStatus::InvalidArgument, format!("axis {axis} out of range")));
        }
        copy_out(m.component(axis), buf, len)
    })
}

/// Dual potential, one value per cell.
///
/// # Safety
/// `s` must come from [`trop_w1_solve`]; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn trop_w1_potential(s: *const TropW1Solution, buf: *mut f64, len: usize) -> TropStatus {
    guard(|| copy_out(s.as_ref().ok_or_else(null)?.inner.phi.values(), buf, len))
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `s` must come from [`trop_w1_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trop_w1_free(s: *mut TropW1Solution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Solves the Wasserstein-2 problem with `cfg.time_slices` slices.
///
/// # Safety
/// As for [`trop_w1_solve`].
#[no_mangle]
pub unsafe extern "C" fn trop_w2_solve(
    nx: usize,
    ny: usize,
    dx: f64,
    q0: *const f64,
    q1: *const f64,
    cfg: *const TropSolverConfig,
    solution: *mut *mut TropW2Solution,
) -> TropStatus {
    guard(|| {
        let slot = out(solution)?;
        *slot = ptr::null_mut();
        let (a, b) = densities(nx, ny, dx, q0, q1)?;
        let sol = solve_w2(&a, &b, &config(cfg)?)?;
        *slot = Box::into_raw(Box::new(TropW2Solution { inner: sol }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`trop_w2_solve`]; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_w2_distance(s: *const TropW2Solution, result: *mut f64) -> TropStatus {
    guard(|| {
        *out(result)? = s.as_ref().ok_or_else(null)?.inner.distance;
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`trop_w2_solve`]; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_w2_status(s: *const TropW2Solution, iterations: *mut u64, converged: *mut bool) -> TropStatus {
    guard(|| {
        let r = &s.as_ref().ok_or_else(null)?.inner.report;
        *out(iterations)? = r.iterations as u64;
        *out(converged)? = r.converged;
        Ok(())
    })
}

/// Number of time slices.
///
/// # Safety
/// `s` must come from [`trop_w2_solve`]; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trop_w2_num_slices(s: *const TropW2Solution, result: *mut u64) -> TropStatus {
    guard(|| {
        *out(result)? = s.as_ref().ok_or_else(null)?.inner.path.nt() as u64;
        Ok(())
    })
}

/// Per-cell masses of slice `n` (0-based, slice `n` at time `n / (nt - 1)`).
///
/// # Safety
/// `s` must come from [`trop_w2_solve`]; `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn trop_w2_slice(s: *const TropW2Solution, n: usize, buf: *mut f64, len: usize) -> TropStatus {
    guard(|| {
        let path = &s.as_ref().ok_or_else(null)?.inner.path;
        if n >= path.nt() {
            return Err(Fail::Status(TropStatus::InvalidArgument, format!("slice {n} out of range")));
        }
        copy_out(&path.slice_masses(n), buf, len)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `s` must come from [`trop_w2_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trop_w2_free(s: *mut TropW2Solution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
