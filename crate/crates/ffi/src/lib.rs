//! C interface to the gendir library.
//!
//! Objects are opaque handles created by `*_new` functions and released with
//! the matching `*_free`. Every fallible function returns a [`GendirStatus`];
//! on failure [`gendir_last_error`] describes the problem. Panics never cross
//! the boundary; they surface as [`GendirStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gendir::distributions::GenDirParams;
use gendir::integrator::{simulate, with_threads, InitialCondition, IntegratorConfig, SimulationOutput};
use gendir::kernel::{self, GenDirProcess};
use gendir::param_map::{distribution_to_sde, sde_to_distribution, SdeCoefficients, UpperTriangular};
use gendir::simplex::SimplexPoint;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GendirStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ValidationFailed = 3,
    Numerical = 4,
    Panic = 5,
}

/// Generalized Dirichlet parameters `(alpha, beta)`.
pub struct GendirParams(GenDirParams);

/// SDE coefficients `(b, S, kappa, c)`.
pub struct GendirCoefficients(SdeCoefficients);

/// Result of an ensemble simulation.
pub struct GendirSimulation(SimulationOutput);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

struct Fail(GendirStatus, String);

fn fail(status: GendirStatus, msg: impl ToString) -> Fail {
    Fail(status, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GendirStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GendirStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            GendirStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(GendirStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn slice_mut<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(fail(GendirStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| fail(GendirStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(fail(GendirStatus::NullPointer, "output handle pointer is null"));
    }
    Ok(())
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gendir_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gendir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// Distribution parameters

/// Creates parameters from `k` values each of `alpha` and `beta`.
///
/// # Safety
/// `alpha` and `beta` must be valid for `k` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gendir_params_new(
    alpha: *const f64,
    beta: *const f64,
    k: usize,
    out: *mut *mut GendirParams,
) -> GendirStatus {
    guard(|| {
        out_ptr(out)?;
        let a = slice(alpha, k, "alpha")?.to_vec();
        let b = slice(beta, k, "beta")?.to_vec();
        let p = GenDirParams::new(a, b).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(GendirParams(p)));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gendir_params_free(p: *mut GendirParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of free components `K`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gendir_params_dim(p: *const GendirParams) -> usize {
    p.as_ref().map_or(0, |p| p.0.dim())
}

/// Writes the `K` means and the row-major `K x K` covariance.
///
/// # Safety
/// `mean` must hold `K` and `cov` `K * K` doubles.
#[no_mangle]
pub unsafe extern "C" fn gendir_params_moments(p: *const GendirParams, mean: *mut f64, cov: *mut f64) -> GendirStatus {
    guard(|| {
        let p = &handle(p, "params")?.0;
        let k = p.dim();
        let m = p.moments();
        slice_mut(mean, k, "mean")?.copy_from_slice(m.mean());
        let cov = slice_mut(cov, k * k, "cov")?;
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] = m.cov(i, j);
            }
        }
        Ok(())
    })
}

/// Log-density at `y` (length `K`). `on_boundary` may be null.
///
/// # Safety
/// `y` must hold `k` doubles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gendir_params_log_density(
    p: *const GendirParams,
    y: *const f64,
    k: usize,
    value: *mut f64,
    on_boundary: *mut bool,
) -> GendirStatus {
    guard(|| {
        let p = &handle(p, "params")?.0;
        let pt = SimplexPoint::new(slice(y, k, "y")?.to_vec()).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        let ld = p.log_density(&pt).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        *slice_mut(value, 1, "value")?.first_mut().expect("one slot") = ld.value;
        if !on_boundary.is_null() {
            *on_boundary = ld.on_boundary;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// SDE coefficients

/// Creates coefficients for `k` components. `c` holds the `(k-1) x (k-1)`
/// row-major coupling matrix whose strict lower triangle must be zero; it may
/// be null when `k == 1`. The coefficients are not validated here.
///
/// # Safety
/// Arrays must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gendir_coefficients_new(
    b: *const f64,
    s: *const f64,
    kappa: *const f64,
    c: *const f64,
    k: usize,
    out: *mut *mut GendirCoefficients,
) -> GendirStatus {
    guard(|| {
        out_ptr(out)?;
        if k == 0 {
            return Err(fail(GendirStatus::InvalidArgument, "k must be at least 1"));
        }
        let n = k - 1;
        let flat = slice(c, n * n, "c")?;
        let rows = flat.chunks(n.max(1)).take(n).map(|r| r.to_vec()).collect();
        let upper = UpperTriangular::from_square_rows(rows).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        let coeffs = SdeCoefficients::new(
            slice(b, k, "b")?.to_vec(),
            slice(s, k, "S")?.to_vec(),
            slice(kappa, k, "kappa")?.to_vec(),
            upper,
        )
        .map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(GendirCoefficients(coeffs)));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gendir_coefficients_free(c: *mut GendirCoefficients) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Checks bounds and the chained equalities that make the invariant a
/// generalized Dirichlet distribution.
///
/// # Safety
/// `c` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gendir_coefficients_validate(c: *const GendirCoefficients) -> GendirStatus {
    guard(|| handle(c, "coefficients")?.0.validate().map_err(|e| fail(GendirStatus::ValidationFailed, e)))
}

/// Invariant distribution of the coefficients.
///
/// # Safety
/// `c` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gendir_sde_to_distribution(
    c: *const GendirCoefficients,
    out: *mut *mut GendirParams,
) -> GendirStatus {
    guard(|| {
        out_ptr(out)?;
        let p =
            sde_to_distribution(&handle(c, "coefficients")?.0).map_err(|e| fail(GendirStatus::ValidationFailed, e))?;
        *out = Box::into_raw(Box::new(GendirParams(p)));
        Ok(())
    })
}

/// Coefficients with invariant `p` for the chosen `kappa` (length `K`).
///
/// # Safety
/// `p` must be a live handle, `kappa` valid for `K` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gendir_distribution_to_sde(
    p: *const GendirParams,
    kappa: *const f64,
    out: *mut *mut GendirCoefficients,
) -> GendirStatus {
    guard(|| {
        out_ptr(out)?;
        let p = &handle(p, "params")?.0;
        let kappa = slice(kappa, p.dim(), "kappa")?;
        let c = distribution_to_sde(p, kappa).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(GendirCoefficients(c)));
        Ok(())
    })
}

/// Which coefficient field to evaluate at a point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GendirField {
    Drift = 0,
    Diffusion = 1,
    PotentialResidual = 2,
}

/// Evaluates drift, diagonal diffusion or the potential residual at `y`,
/// writing `k` values to `out`.
///
/// # Safety
/// `y` and `out` must be valid for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn gendir_evaluate(
    c: *const GendirCoefficients,
    field: GendirField,
    y: *const f64,
    k: usize,
    out: *mut f64,
) -> GendirStatus {
    guard(|| {
        let c = &handle(c, "coefficients")?.0;
        let pt = SimplexPoint::new(slice(y, k, "y")?.to_vec()).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        let v = match field {
            GendirField::Drift => kernel::drift(c, &pt),
            GendirField::Diffusion => kernel::diffusion_diag(c, &pt),
            GendirField::PotentialResidual => kernel::potential_residual(c, &pt),
        }
        .map_err(|e| fail(GendirStatus::Numerical, e))?;
        slice_mut(out, k, "out")?.copy_from_slice(&v);
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// Simulation

/// Integrator settings for [`gendir_simulate`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GendirIntegratorOptions {
    pub dt: f64,
    pub t_end: f64,
    pub particles: usize,
    pub seed: u64,
    /// Steps between moment records.
    pub record_stride: u64,
    pub boundary_retries: u32,
    /// Worker threads; 0 selects all cores. Results do not depend on it.
    pub threads: usize,
}

/// Default integrator settings.
#[no_mangle]
pub extern "C" fn gendir_integrator_defaults() -> GendirIntegratorOptions {
    let d = IntegratorConfig::default();
    GendirIntegratorOptions {
        dt: d.dt,
        t_end: d.t_end,
        particles: d.particles,
        seed: d.seed,
        record_stride: d.record_stride,
        boundary_retries: d.boundary_retries,
        threads: 0,
    }
}

/// Simulates the ensemble from the point `y0` (length `K`).
///
/// # Safety
/// `c` must be a live handle, `y0` valid for `K` reads and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gendir_simulate(
    c: *const GendirCoefficients,
    options: GendirIntegratorOptions,
    y0: *const f64,
    out: *mut *mut GendirSimulation,
) -> GendirStatus {
    guard(|| {
        out_ptr(out)?;
        let coeffs = handle(c, "coefficients")?.0.clone();
        let k = coeffs.dim();
        let process = GenDirProcess::new(coeffs).map_err(|e| fail(GendirStatus::ValidationFailed, e))?;
        let start =
            SimplexPoint::new(slice(y0, k, "y0")?.to_vec()).map_err(|e| fail(GendirStatus::InvalidArgument, e))?;
        let cfg = IntegratorConfig {
            dt: options.dt,
            t_end: options.t_end,
            particles: options.particles,
            seed: options.seed,
            boundary_retries: options.boundary_retries,
            record_stride: options.record_stride,
            trajectory_particles: 0,
        };
        let result = with_threads(options.threads, || simulate(&process, &cfg, &InitialCondition::Point(start)))
            .map_err(|e| fail(GendirStatus::InvalidArgument, e))?
            .map_err(|e| fail(GendirStatus::Numerical, e))?;
        *out = Box::into_raw(Box::new(GendirSimulation(result)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gendir_simulation_free(s: *mut GendirSimulation) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of moment records, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gendir_simulation_records(s: *const GendirSimulation) -> usize {
    s.as_ref().map_or(0, |s| s.0.series.len())
}

/// Number of particles that were projected back after exhausting the retries.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gendir_simulation_clamped(s: *const GendirSimulation) -> u64 {
    s.as_ref().map_or(0, |s| s.0.diagnostics.steps.clamped)
}

/// Copies record `index`: its time, the `N = K + 1` means and the row-major
/// `N x N` covariance (NaN when fewer than two particles were simulated).
///
/// # Safety
/// `t` must be writable, `mean` hold `N` and `cov` `N * N` doubles.
#[no_mangle]
pub unsafe extern "C" fn gendir_simulation_record(
    s: *const GendirSimulation,
    index: usize,
    t: *mut f64,
    mean: *mut f64,
    cov: *mut f64,
) -> GendirStatus {
    guard(|| {
        let s = &handle(s, "simulation")?.0;
        let r = s
            .series
            .records()
            .get(index)
            .ok_or_else(|| fail(GendirStatus::InvalidArgument, format!("record {index} out of range")))?;
        let n = r.dim();
        slice_mut(t, 1, "t")?[0] = r.t;
        slice_mut(mean, n, "mean")?.copy_from_slice(&r.mean);
        let cov = slice_mut(cov, n * n, "cov")?;
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = r.covariance(i, j).unwrap_or(f64::NAN);
            }
        }
        Ok(())
    })
}
