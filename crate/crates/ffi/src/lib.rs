//! C ABI for torsilimit.
//!
//! Objects cross the boundary as opaque handles created by `tl_*_load` /
//! `tl_*_from_json` / `tl_*_compute` and released with the matching
//! `tl_*_free`. Every fallible call returns a [`TlStatus`]; on failure
//! [`tl_last_error_message`] describes the error for the calling thread.
//! Panics never unwind into C: they are caught and reported as
//! `TL_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use torsilimit::fatigue::{miner_damage, rainflow};
use torsilimit::interaction::{compute_if_matrix, solve_power_flow, IFMatrix};
use torsilimit::limits::{compute_limit_profile, LimitConfig, LimitProfile};
use torsilimit::model::{
    parse_case, parse_material, parse_shaft, DataCenterSite, MaterialSpec, NetworkCase,
    ShaftAssembly,
};
use torsilimit::planner::{compliance_check, optimize_allocations, site_bounds};
use torsilimit::shaft::{torsional_modes, FrequencyGrid, LinearShaftModel, OperatingPoint};
use torsilimit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Infeasible = 6,
    Panic = 7,
}

/// Single-machine infinite-bus operating point, p.u. on the machine base.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TlOperatingPoint {
    pub e: f64,
    pub v: f64,
    pub x: f64,
    /// Electrical power.
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TlLimitOptions {
    pub cap_fraction: f64,
    pub delta_f_max_hz: f64,
    pub grid_step_hz: f64,
    pub grid_refine_hz: f64,
}

pub struct TlShaft(ShaftAssembly);
pub struct TlMaterial(MaterialSpec);
pub struct TlCase(NetworkCase);
pub struct TlLimitProfile(LimitProfile);
pub struct TlIfMatrix(IFMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TlStatus {
    match e {
        Error::Io { .. } => TlStatus::Io,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => TlStatus::Parse,
        Error::Validation(_) | Error::Domain(_) | Error::YieldExceeded { .. } => {
            TlStatus::InvalidArgument
        }
        _ => TlStatus::Numerical,
    }
}

enum Fail {
    Core(Error),
    Status(TlStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(TlStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Status(TlStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any error and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_slice<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn tl_limit_options_default() -> TlLimitOptions {
    let c = LimitConfig::default();
    TlLimitOptions {
        cap_fraction: c.cap_fraction,
        delta_f_max_hz: c.delta_f_max_hz,
        grid_step_hz: c.grid.step_hz,
        grid_refine_hz: c.grid.refine_hz,
    }
}

#[no_mangle]
pub unsafe extern "C" fn tl_shaft_load(path: *const c_char, out: *mut *mut TlShaft) -> TlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put_handle(out, TlShaft(parse_shaft(Path::new(path))?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_shaft_from_json(json: *const c_char, out: *mut *mut TlShaft) -> TlStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        put_handle(out, TlShaft(ShaftAssembly::from_json(text)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_shaft_free(shaft: *mut TlShaft) {
    free_handle(shaft)
}

#[no_mangle]
pub unsafe extern "C" fn tl_shaft_mass_count(shaft: *const TlShaft) -> usize {
    shaft.as_ref().map_or(0, |s| s.0.n_masses())
}

/// Free-free torsional mode frequencies in rad/s, ascending. Writes at most
/// `capacity` values; `*len` receives the number of modes.
#[no_mangle]
pub unsafe extern "C" fn tl_shaft_torsional_modes(
    shaft: *const TlShaft,
    out: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> TlStatus {
    guard(|| {
        let modes = torsional_modes(&handle(shaft, "shaft")?.0);
        put(len, modes.len(), "len")?;
        let n = modes.len().min(capacity);
        out_slice(out, n, "out")?.copy_from_slice(&modes[..n]);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_material_load(path: *const c_char, out: *mut *mut TlMaterial) -> TlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put_handle(out, TlMaterial(parse_material(Path::new(path))?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_material_from_json(
    json: *const c_char,
    out: *mut *mut TlMaterial,
) -> TlStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        put_handle(out, TlMaterial(MaterialSpec::from_json(text)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_material_free(material: *mut TlMaterial) {
    free_handle(material)
}

#[no_mangle]
pub unsafe extern "C" fn tl_case_load(path: *const c_char, out: *mut *mut TlCase) -> TlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put_handle(out, TlCase(parse_case(Path::new(path))?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_case_from_json(json: *const c_char, out: *mut *mut TlCase) -> TlStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        put_handle(out, TlCase(NetworkCase::from_json(text)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_case_free(case: *mut TlCase) {
    free_handle(case)
}

/// Limit profile of a machine at an infinite-bus operating point. `options`
/// may be NULL for defaults.
#[no_mangle]
pub unsafe extern "C" fn tl_limit_profile_compute(
    shaft: *const TlShaft,
    material: *const TlMaterial,
    op: *const TlOperatingPoint,
    options: *const TlLimitOptions,
    out: *mut *mut TlLimitProfile,
) -> TlStatus {
    guard(|| {
        let shaft = &handle(shaft, "shaft")?.0;
        let material = &handle(material, "material")?.0;
        let op = *handle(op, "operating point")?;
        let o = options.as_ref().copied().unwrap_or_else(|| tl_limit_options_default());
        let config = LimitConfig {
            cap_fraction: o.cap_fraction,
            delta_f_max_hz: o.delta_f_max_hz,
            grid: FrequencyGrid {
                step_hz: o.grid_step_hz,
                refine_hz: o.grid_refine_hz,
            },
        };
        let point = OperatingPoint::from_power(op.e, op.v, op.x, op.p)?;
        let model = LinearShaftModel::new(shaft, point)?;
        let name = if shaft.name.is_empty() { "G1" } else { &shaft.name };
        let profile = compute_limit_profile(name, &model, material, &config)?;
        put_handle(out, TlLimitProfile(profile))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_limit_profile_free(profile: *mut TlLimitProfile) {
    free_handle(profile)
}

/// Multi-frequency bound P_e^max, MW.
#[no_mangle]
pub unsafe extern "C" fn tl_limit_profile_p_e_max(
    profile: *const TlLimitProfile,
    out: *mut f64,
) -> TlStatus {
    guard(|| put(out, handle(profile, "profile")?.0.p_e_max, "out"))
}

#[no_mangle]
pub unsafe extern "C" fn tl_limit_profile_len(profile: *const TlLimitProfile) -> usize {
    profile.as_ref().map_or(0, |p| p.0.omegas.len())
}

/// Copies up to `capacity` grid points: frequency (Hz) and the combined
/// limit curve (MW). Either output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tl_limit_profile_curve(
    profile: *const TlLimitProfile,
    freqs_hz: *mut f64,
    p_max_mw: *mut f64,
    capacity: usize,
) -> TlStatus {
    guard(|| {
        let p = &handle(profile, "profile")?.0;
        let n = p.omegas.len().min(capacity);
        if !freqs_hz.is_null() {
            out_slice(freqs_hz, n, "freqs_hz")?.copy_from_slice(&p.freqs_hz()[..n]);
        }
        if !p_max_mw.is_null() {
            out_slice(p_max_mw, n, "p_max_mw")?.copy_from_slice(&p.p_max_curve[..n]);
        }
        Ok(())
    })
}

/// Interaction factors of every synchronous generator for the given load
/// buses. A nonpositive `perturbation_mw` selects the default.
#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_compute(
    case: *const TlCase,
    buses: *const u32,
    n_buses: usize,
    perturbation_mw: f64,
    out: *mut *mut TlIfMatrix,
) -> TlStatus {
    guard(|| {
        let case = &handle(case, "case")?.0;
        let buses = slice_arg(buses, n_buses, "buses")?;
        let base = solve_power_flow(case, None)?;
        let dp = (perturbation_mw > 0.0).then_some(perturbation_mw);
        put_handle(out, TlIfMatrix(compute_if_matrix(case, &base, buses, dp)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_free(m: *mut TlIfMatrix) {
    free_handle(m)
}

#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_generator_count(m: *const TlIfMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n_generators())
}

#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_site_count(m: *const TlIfMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.n_sites())
}

/// IF between generator `gen` and site `site`; NaN for a column whose load
/// flow failed.
#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_get(
    m: *const TlIfMatrix,
    gen: usize,
    site: usize,
    out: *mut f64,
) -> TlStatus {
    guard(|| {
        let m = &handle(m, "matrix")?.0;
        if gen >= m.n_generators() || site >= m.n_sites() {
            return Err(invalid(format!("index ({gen}, {site}) out of range")));
        }
        put(out, m.get(gen, site), "out")
    })
}

/// 1 if the column of `site` was computed, 0 otherwise (or out of range).
#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_column_valid(m: *const TlIfMatrix, site: usize) -> c_int {
    m.as_ref()
        .and_then(|m| m.0.valid.get(site).copied())
        .map_or(0, c_int::from)
}

/// Copies the id of generator `gen` into `buf` (NUL-terminated, truncated to
/// `capacity`). `*needed` receives the full length including the NUL.
#[no_mangle]
pub unsafe extern "C" fn tl_if_matrix_generator_id(
    m: *const TlIfMatrix,
    gen: usize,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> TlStatus {
    guard(|| {
        let m = &handle(m, "matrix")?.0;
        let id = m
            .generators
            .get(gen)
            .ok_or_else(|| invalid(format!("generator index {gen} out of range")))?;
        let bytes = id.as_bytes();
        put(needed, bytes.len() + 1, "needed")?;
        if capacity > 0 {
            let dst = out_slice(buf.cast::<u8>(), capacity, "buf")?;
            let n = bytes.len().min(capacity - 1);
            dst[..n].copy_from_slice(&bytes[..n]);
            dst[n] = 0;
        }
        Ok(())
    })
}

/// Per-site bound `min(min_i P_e_max[i]/w[i][j], 0.25·rating[j])`, in input
/// order (not ranked). `weights` is row-major `n_generators × n_sites`.
#[no_mangle]
pub unsafe extern "C" fn tl_site_bounds(
    p_e_max: *const f64,
    n_generators: usize,
    weights: *const f64,
    ratings_mw: *const f64,
    n_sites: usize,
    out_bounds: *mut f64,
) -> TlStatus {
    guard(|| {
        let p = slice_arg(p_e_max, n_generators, "p_e_max")?;
        let w = slice_arg(weights, n_generators * n_sites, "weights")?;
        let ratings = slice_arg(ratings_mw, n_sites, "ratings_mw")?;
        let out = out_slice(out_bounds, n_sites, "out_bounds")?;
        let rows: Vec<Vec<f64>> = w.chunks(n_sites.max(1)).map(<[f64]>::to_vec).collect();
        let rows = if n_sites == 0 { vec![Vec::new(); n_generators] } else { rows };
        let ids: Vec<String> = (0..n_generators).map(|i| format!("G{i}")).collect();
        let sites: Vec<DataCenterSite> = ratings
            .iter()
            .enumerate()
            .map(|(j, r)| DataCenterSite {
                bus: j as u32,
                rating_mw: *r,
                existing: false,
            })
            .collect();
        for b in site_bounds(p, &ids, &rows, &sites, None)? {
            out[b.bus as usize] = b.p_dc_max;
        }
        Ok(())
    })
}

/// Iterative allocation LP. Returns `TL_STATUS_INFEASIBLE` if no `α ≥ 0`
/// gives a feasible program. Any of `out_alpha`, `out_iterations` may be
/// NULL.
#[no_mangle]
pub unsafe extern "C" fn tl_optimize_allocations(
    p_e_max: *const f64,
    n_generators: usize,
    weights: *const f64,
    bounds_mw: *const f64,
    n_sites: usize,
    beta: f64,
    out_allocations: *mut f64,
    out_alpha: *mut f64,
    out_iterations: *mut usize,
) -> TlStatus {
    guard(|| {
        let p = slice_arg(p_e_max, n_generators, "p_e_max")?;
        let w = slice_arg(weights, n_generators * n_sites, "weights")?;
        let bounds = slice_arg(bounds_mw, n_sites, "bounds_mw")?;
        let out = out_slice(out_allocations, n_sites, "out_allocations")?;
        let rows: Vec<Vec<f64>> = if n_sites == 0 {
            vec![Vec::new(); n_generators]
        } else {
            w.chunks(n_sites).map(<[f64]>::to_vec).collect()
        };
        let r = optimize_allocations(p, &rows, bounds, beta)?;
        if !out_alpha.is_null() {
            *out_alpha = r.alpha_final;
        }
        if !out_iterations.is_null() {
            *out_iterations = r.iterations;
        }
        if !r.feasible {
            return Err(Fail::Status(TlStatus::Infeasible, "allocation LP is infeasible".into()));
        }
        out.copy_from_slice(&r.allocations);
        Ok(())
    })
}

/// FFT compliance of a 10 s window. `*out_pass` is 1 on pass, 0 on fail.
#[no_mangle]
pub unsafe extern "C" fn tl_compliance_check(
    series_mw: *const f64,
    n: usize,
    sample_rate_hz: f64,
    f_sync_hz: f64,
    limit_mw: f64,
    out_amplitude_sum: *mut f64,
    out_pass: *mut c_int,
) -> TlStatus {
    guard(|| {
        let s = slice_arg(series_mw, n, "series")?;
        let r = compliance_check(s, sample_rate_hz, f_sync_hz, limit_mw)?;
        put(out_amplitude_sum, r.amplitude_sum_mw, "out_amplitude_sum")?;
        put(out_pass, c_int::from(r.pass), "out_pass")
    })
}

/// Rainflow cycles of a series. Writes at most `capacity` cycles; `*len`
/// receives the total number. Counts are 1 for full and 0.5 for half cycles.
#[no_mangle]
pub unsafe extern "C" fn tl_rainflow(
    series: *const f64,
    n: usize,
    ranges: *mut f64,
    means: *mut f64,
    counts: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> TlStatus {
    guard(|| {
        let s = slice_arg(series, n, "series")?;
        let set = rainflow(s)?;
        put(len, set.cycles.len(), "len")?;
        let k = set.cycles.len().min(capacity);
        let r = out_slice(ranges, k, "ranges")?;
        let m = out_slice(means, k, "means")?;
        let c = out_slice(counts, k, "counts")?;
        for (i, cy) in set.cycles.iter().take(k).enumerate() {
            r[i] = cy.range;
            m[i] = cy.mean;
            c[i] = cy.count;
        }
        Ok(())
    })
}

/// Miner damage of a stress series against a material.
#[no_mangle]
pub unsafe extern "C" fn tl_miner_damage(
    series: *const f64,
    n: usize,
    material: *const TlMaterial,
    out_damage: *mut f64,
) -> TlStatus {
    guard(|| {
        let s = slice_arg(series, n, "series")?;
        let m = &handle(material, "material")?.0;
        let d = miner_damage(&rainflow(s)?, m)?;
        put(out_damage, d, "out_damage")
    })
}
