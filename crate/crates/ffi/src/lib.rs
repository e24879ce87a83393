//! C ABI for `smallball`.
//!
//! Densities and masks are opaque handles created by `sb_*_new`/`sb_*_read`
//! style functions and released with the matching `*_free`. Every fallible
//! function returns an [`SbStatus`]; on failure a one-line description is
//! available from [`sb_last_error_message`] on the same thread. Results are
//! written through out-pointers, which are left untouched on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use smallball::sbd::{format_density, read_density_file, write_file_atomic};
use smallball::verify::{generate_bounded_density, RandomDensitySpec, Shape};
use smallball::{
    ball_radius_for_volume, rogozin_bound_density, rogozin_bound_prob, small_ball_prob,
    sum_density, sum_density_cell_exact, symmetric_decreasing_rearrangement, Error, GridDensity,
    GridSpec, RegionMask,
};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidGrid = 3,
    InvalidDensity = 4,
    ShapeMismatch = 5,
    NotOriginCentered = 6,
    VolumeTooLarge = 7,
    GuardExceeded = 8,
    HypothesisViolated = 9,
    Infeasible = 10,
    Precondition = 11,
    GridTooCoarse = 12,
    Parse = 13,
    Io = 14,
    Panic = 15,
}

/// Shape family of [`sb_density_generate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbShape {
    MultiBump = 0,
    RandomCells = 1,
    IndicatorUnion = 2,
}

/// Piecewise-constant density on a rectangular grid.
pub struct SbDensity(GridDensity);

/// Set of grid cells.
pub struct SbMask(RegionMask);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let clean: String = message
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).ok());
}

fn status_of(e: &Error) -> SbStatus {
    match e {
        Error::InvalidGrid(_) => SbStatus::InvalidGrid,
        Error::InvalidDensity(_) => SbStatus::InvalidDensity,
        Error::ShapeMismatch(_) => SbStatus::ShapeMismatch,
        Error::NotOriginCentered { .. } => SbStatus::NotOriginCentered,
        Error::VolumeTooLarge { .. } => SbStatus::VolumeTooLarge,
        Error::GuardExceeded { .. } => SbStatus::GuardExceeded,
        Error::HypothesisViolated { .. } => SbStatus::HypothesisViolated,
        Error::Infeasible(_) => SbStatus::Infeasible,
        Error::Precondition(_) => SbStatus::Precondition,
        Error::GridTooCoarse(_) => SbStatus::GridTooCoarse,
        Error::Parse { .. } => SbStatus::Parse,
        Error::Io(_) => SbStatus::Io,
    }
}

/// Failure inside a call, before it is turned into a status.
struct Failure(SbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SbStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, records any failure and converts panics into `Panic`.
fn guarded(body: impl FnOnce() -> Result<(), Failure>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SbStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SbStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn spec_from(
    dim: usize,
    lo: *const f64,
    hi: *const f64,
    counts: *const usize,
) -> Result<GridSpec, Failure> {
    let lo = slice(lo, dim, "lo")?;
    let hi = slice(hi, dim, "hi")?;
    let counts = slice(counts, dim, "counts")?;
    let extents = lo.iter().copied().zip(hi.iter().copied()).collect();
    Ok(GridSpec::new(extents, counts.to_vec())?)
}

unsafe fn densities(fs: *const *const SbDensity, n: usize) -> Result<Vec<GridDensity>, Failure> {
    slice(fs, n, "density array")?
        .iter()
        .map(|&f| {
            f.as_ref()
                .map(|f| f.0.clone())
                .ok_or_else(|| null("density"))
        })
        .collect()
}

/// Boxes `value` into a new handle, after checking `out`.
unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a density on the grid `[lo[a], hi[a]]` with `counts[a]` cells per
/// axis from `len` row-major cell values (last axis fastest).
///
/// # Safety
/// `lo`, `hi` and `counts` must point to `dim` readable elements, `values` to
/// `len`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_new(
    dim: usize,
    lo: *const f64,
    hi: *const f64,
    counts: *const usize,
    values: *const f64,
    len: usize,
    out: *mut *mut SbDensity,
) -> SbStatus {
    guarded(|| {
        let spec = spec_from(dim, lo, hi, counts)?;
        let values = slice(values, len, "values")?.to_vec();
        let f = GridDensity::new(spec, values)?;
        write_handle(out, SbDensity(f))
    })
}

/// Random density bounded by `k` with unit mass on the cube `[lo, hi]^dim`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_generate(
    dim: usize,
    k: f64,
    lo: f64,
    hi: f64,
    cells: usize,
    seed: u64,
    shape: SbShape,
    out: *mut *mut SbDensity,
) -> SbStatus {
    guarded(|| {
        let shape = match shape {
            SbShape::MultiBump => Shape::MultiBump,
            SbShape::RandomCells => Shape::RandomCells,
            SbShape::IndicatorUnion => Shape::IndicatorUnion,
        };
        let spec = GridSpec::cube(dim, lo, hi, cells)?;
        let f = generate_bounded_density(&RandomDensitySpec {
            k,
            spec,
            seed,
            shape,
        })?;
        write_handle(out, SbDensity(f))
    })
}

/// Reads an SBD density file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_read(
    path: *const c_char,
    out: *mut *mut SbDensity,
) -> SbStatus {
    guarded(|| {
        let f = read_density_file(path_arg(path)?)?;
        write_handle(out, SbDensity(f))
    })
}

/// Writes `f` as an SBD file, atomically.
///
/// # Safety
/// `f` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sb_density_write(f: *const SbDensity, path: *const c_char) -> SbStatus {
    guarded(|| {
        let f = f.as_ref().ok_or_else(|| null("density"))?;
        write_file_atomic(path_arg(path)?, &format_density(&f.0))?;
        Ok(())
    })
}

/// Releases a density. NULL is ignored.
///
/// # Safety
/// `f` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_density_free(f: *mut SbDensity) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of axes, or 0 for NULL.
///
/// # Safety
/// `f` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_density_dim(f: *const SbDensity) -> usize {
    f.as_ref().map_or(0, |f| f.0.spec().dim())
}

/// Number of cells, or 0 for NULL.
///
/// # Safety
/// `f` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_density_len(f: *const SbDensity) -> usize {
    f.as_ref().map_or(0, |f| f.0.values().len())
}

/// Copies the cell values into `out`, which must hold exactly
/// `sb_density_len(f)` elements.
///
/// # Safety
/// `f` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sb_density_values(
    f: *const SbDensity,
    out: *mut f64,
    len: usize,
) -> SbStatus {
    guarded(|| {
        let f = f.as_ref().ok_or_else(|| null("density"))?;
        let values = f.0.values();
        if len != values.len() {
            return Err(Failure(
                SbStatus::ShapeMismatch,
                format!("buffer holds {len} values, density has {}", values.len()),
            ));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, len);
        Ok(())
    })
}

/// `∫ f`.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_integral(f: *const SbDensity, out: *mut f64) -> SbStatus {
    guarded(|| write_out(out, f.as_ref().ok_or_else(|| null("density"))?.0.integral()))
}

/// Largest cell value.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_ess_sup(f: *const SbDensity, out: *mut f64) -> SbStatus {
    guarded(|| write_out(out, f.as_ref().ok_or_else(|| null("density"))?.0.ess_sup()))
}

/// Symmetric decreasing rearrangement; the grid must be centred at the
/// origin.
///
/// # Safety
/// `f` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_rearrange(
    f: *const SbDensity,
    out: *mut *mut SbDensity,
) -> SbStatus {
    guarded(|| {
        let f = f.as_ref().ok_or_else(|| null("density"))?;
        let g = symmetric_decreasing_rearrangement(&f.0)?;
        write_handle(out, SbDensity(g))
    })
}

/// Density of the sum of `n` independent variables. With `cell_exact`
/// nonzero the result holds exact cell averages of the continuous sum,
/// otherwise the lattice sum on the common cell width.
///
/// # Safety
/// `fs` must point to `n` live handles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_sum_density(
    fs: *const *const SbDensity,
    n: usize,
    cell_exact: i32,
    out: *mut *mut SbDensity,
) -> SbStatus {
    guarded(|| {
        let fs = densities(fs, n)?;
        let sum = if cell_exact != 0 {
            sum_density_cell_exact(&fs)?
        } else {
            sum_density(&fs)?
        };
        write_handle(out, SbDensity(sum))
    })
}

/// Creates a mask from `len` row-major flags (nonzero means included).
///
/// # Safety
/// `lo`, `hi` and `counts` must point to `dim` readable elements, `included`
/// to `len`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_mask_new(
    dim: usize,
    lo: *const f64,
    hi: *const f64,
    counts: *const usize,
    included: *const u8,
    len: usize,
    out: *mut *mut SbMask,
) -> SbStatus {
    guarded(|| {
        let spec = spec_from(dim, lo, hi, counts)?;
        let included = slice(included, len, "included")?
            .iter()
            .map(|&b| b != 0)
            .collect();
        write_handle(out, SbMask(RegionMask::new(spec, included)?))
    })
}

/// Releases a mask. NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sb_mask_free(m: *mut SbMask) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `P(X_1 + ... + X_n ∈ S)` from the lattice sum, with `S` moved onto the
/// sum grid by cell-centre membership.
///
/// # Safety
/// `fs` must point to `n` live handles, `s` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_small_ball_prob(
    fs: *const *const SbDensity,
    n: usize,
    s: *const SbMask,
    out: *mut f64,
) -> SbStatus {
    guarded(|| {
        let fs = densities(fs, n)?;
        let s = s.as_ref().ok_or_else(|| null("mask"))?;
        write_out(out, small_ball_prob(&fs, &s.0)?)
    })
}

/// Extremal small-ball bound for a set of volume `set_volume` and its
/// discretization budget.
///
/// # Safety
/// `ks` must point to `n` readable values; `value` and `budget` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_prob(
    dim: usize,
    ks: *const f64,
    n: usize,
    set_volume: f64,
    resolution: usize,
    value: *mut f64,
    budget: *mut f64,
) -> SbStatus {
    guarded(|| {
        let b = rogozin_bound_prob(dim, slice(ks, n, "ks")?, set_volume, resolution)?;
        if value.is_null() || budget.is_null() {
            return Err(null("output pointer"));
        }
        write_out(value, b.value)?;
        write_out(budget, b.budget)
    })
}

/// Maximum density of the extremal sum and its discretization budget.
///
/// # Safety
/// `ks` must point to `n` readable values; `value` and `budget` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_bound_density(
    dim: usize,
    ks: *const f64,
    n: usize,
    resolution: usize,
    value: *mut f64,
    budget: *mut f64,
) -> SbStatus {
    guarded(|| {
        let b = rogozin_bound_density(dim, slice(ks, n, "ks")?, resolution)?;
        if value.is_null() || budget.is_null() {
            return Err(null("output pointer"));
        }
        write_out(value, b.value)?;
        write_out(budget, b.budget)
    })
}

/// Radius of the `dim`-dimensional ball of volume `volume`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_ball_radius_for_volume(
    dim: usize,
    volume: f64,
    out: *mut f64,
) -> SbStatus {
    guarded(|| write_out(out, ball_radius_for_volume(dim, volume)?))
}
