//! C interface to crafem.
//!
//! Objects are opaque heap handles created by `crafem_*_new`-style calls and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CrafemStatus`]; on failure the message is available through
//! [`crafem_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use crafem::afem::{afem_run_from, AfemConfig, AfemResult};
use crafem::assembly::{solve, Solution, SolverOptions};
use crafem::estimate::energy;
use crafem::mesh::{parse_mesh, Triangulation};
use crafem::problems::{problem, ProblemSpec};
use crafem::Error;

/// Status codes. `CRAFEM_STATUS_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrafemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownProblem = 3,
    MeshError = 4,
    SolverError = 5,
    /// Index past the end, or output buffer too small.
    OutOfRange = 6,
    /// The objects belong to different problems or meshes.
    Mismatch = 7,
    Internal = 99,
}

/// A catalog problem.
pub struct CrafemProblem(ProblemSpec);

/// A triangulation.
pub struct CrafemMesh(Triangulation);

/// A discrete solution together with the problem it solves.
pub struct CrafemSolution {
    solution: Solution,
    problem: ProblemSpec,
}

/// Result of an adaptive run.
pub struct CrafemAfemRun(AfemResult);

/// One iteration of an adaptive run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct CrafemAfemRow {
    pub iter: usize,
    pub n_elems: usize,
    pub n_sides: usize,
    pub n_marked: usize,
    pub eta_bar_sq: f64,
    pub eta_total_sq: f64,
    pub energy: f64,
    /// Energy error against the exact solution, or NaN if none is known.
    pub err_ref: f64,
}

/// Parameters of an adaptive run. Zero limits mean "unlimited".
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CrafemAfemParams {
    pub mu: f64,
    pub gamma: f64,
    pub max_elems: usize,
    pub max_iters: usize,
    pub tol: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|b| *b != 0));
    });
}

fn status_of(err: &Error) -> CrafemStatus {
    match err {
        Error::UnknownProblem(_) => CrafemStatus::UnknownProblem,
        Error::InvalidParameter(_) | Error::ComponentMismatch { .. } => CrafemStatus::InvalidArgument,
        Error::Parse { .. }
        | Error::NonConforming { .. }
        | Error::MatchingViolation { .. }
        | Error::DegenerateElement { .. }
        | Error::Io(_) => CrafemStatus::MeshError,
        Error::Solver(_) | Error::Iteration { .. } => CrafemStatus::SolverError,
        Error::ForeignForest | Error::NotRefinement | Error::WrongTriangulation => CrafemStatus::Mismatch,
        _ => CrafemStatus::Internal,
    }
}

struct Fail(CrafemStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CrafemStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CrafemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CrafemStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            CrafemStatus::Internal
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Fail(CrafemStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn crafem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn crafem_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(e.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        e.len()
    })
}

/// Looks up a catalog problem by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn crafem_problem_new(name: *const c_char, out: *mut *mut CrafemProblem) -> CrafemStatus {
    guard(|| {
        let name = unsafe { c_str(name, "name") }?;
        let p = problem(name)?;
        unsafe { put(out, Box::into_raw(Box::new(CrafemProblem(p)))) }
    })
}

/// # Safety
/// `p` must be null or a handle from [`crafem_problem_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn crafem_problem_free(p: *mut CrafemProblem) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Number of vector components of the unknown (1 for Poisson, 2 for Stokes).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_problem_components(p: *const CrafemProblem, out: *mut usize) -> CrafemStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "problem") }?;
        unsafe { put(out, p.0.kind.components()) }
    })
}

/// The problem's initial mesh refined uniformly `refine_uniform` times.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_problem_mesh(
    p: *const CrafemProblem,
    refine_uniform: usize,
    out: *mut *mut CrafemMesh,
) -> CrafemStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "problem") }?;
        let tri = p.0.initial_mesh()?.uniform_refine_times(refine_uniform);
        unsafe { put(out, Box::into_raw(Box::new(CrafemMesh(tri)))) }
    })
}

/// Parses a mesh in the text format (`vertices n`, coordinates,
/// `triangles m`, vertex triples with the refinement edge opposite the first).
///
/// # Safety
/// `text` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_mesh_parse(text: *const c_char, out: *mut *mut CrafemMesh) -> CrafemStatus {
    guard(|| {
        let text = unsafe { c_str(text, "text") }?;
        let tri = parse_mesh(text)?.bottom();
        unsafe { put(out, Box::into_raw(Box::new(CrafemMesh(tri)))) }
    })
}

/// # Safety
/// `m` must be null or a mesh handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn crafem_mesh_free(m: *mut CrafemMesh) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Element and side counts.
///
/// # Safety
/// `m` must be valid; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn crafem_mesh_counts(m: *const CrafemMesh, elements: *mut usize, sides: *mut usize) -> CrafemStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "mesh") }?;
        if !elements.is_null() {
            unsafe { elements.write(m.0.num_elements()) };
        }
        if !sides.is_null() {
            unsafe { sides.write(m.0.num_sides()) };
        }
        Ok(())
    })
}

/// Midpoint of side `side` written to `xy[0..2]`.
///
/// # Safety
/// `m` must be valid and `xy` valid for two doubles.
#[no_mangle]
pub unsafe extern "C" fn crafem_mesh_side_midpoint(m: *const CrafemMesh, side: usize, xy: *mut f64) -> CrafemStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "mesh") }?;
        if side >= m.0.num_sides() {
            return Err(Fail(CrafemStatus::OutOfRange, format!("side {side} of {}", m.0.num_sides())));
        }
        if xy.is_null() {
            return Err(null("xy"));
        }
        let p = m.0.side(side).midpoint;
        unsafe { ptr::copy_nonoverlapping(p.as_ptr(), xy, 2) };
        Ok(())
    })
}

/// New mesh refined uniformly `times` times.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_mesh_refine_uniform(m: *const CrafemMesh, times: usize, out: *mut *mut CrafemMesh) -> CrafemStatus {
    guard(|| {
        let m = unsafe { as_ref(m, "mesh") }?;
        let tri = m.0.uniform_refine_times(times);
        unsafe { put(out, Box::into_raw(Box::new(CrafemMesh(tri)))) }
    })
}

/// Solves the problem on `m`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_solve(
    p: *const CrafemProblem,
    m: *const CrafemMesh,
    out: *mut *mut CrafemSolution,
) -> CrafemStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "problem") }?;
        let m = unsafe { as_ref(m, "mesh") }?;
        let solution = solve(p.0.kind, &m.0, &p.0.f, &SolverOptions::default())?;
        let s = CrafemSolution { solution, problem: p.0.clone() };
        unsafe { put(out, Box::into_raw(Box::new(s))) }
    })
}

/// # Safety
/// `s` must be null or a solution handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn crafem_solution_free(s: *mut CrafemSolution) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Coefficient (side mean) of component `comp` on side `side`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_solution_side_value(
    s: *const CrafemSolution,
    side: usize,
    comp: usize,
    out: *mut f64,
) -> CrafemStatus {
    guard(|| {
        let s = unsafe { as_ref(s, "solution") }?;
        let u = &s.solution.u;
        if side >= u.tri().num_sides() || comp >= u.components() {
            return Err(Fail(CrafemStatus::OutOfRange, format!("side {side}, component {comp}")));
        }
        unsafe { put(out, u.coeff(side, comp)) }
    })
}

/// Copies all coefficients (component-major, one block of `num_sides` per
/// component) into `buf`. `needed` receives the required length; if `len`
/// is smaller, nothing is copied and `CRAFEM_STATUS_OUT_OF_RANGE` is returned.
///
/// # Safety
/// `buf` must be valid for `len` doubles (or null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn crafem_solution_coefficients(
    s: *const CrafemSolution,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> CrafemStatus {
    guard(|| {
        let s = unsafe { as_ref(s, "solution") }?;
        let c = s.solution.u.coeffs();
        if !needed.is_null() {
            unsafe { needed.write(c.len()) };
        }
        if len < c.len() {
            return Err(Fail(CrafemStatus::OutOfRange, format!("buffer holds {len} of {} values", c.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        unsafe { ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len()) };
        Ok(())
    })
}

/// Energy `G` of the solution with data weight `gamma`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_solution_energy(s: *const CrafemSolution, gamma: f64, out: *mut f64) -> CrafemStatus {
    guard(|| {
        let s = unsafe { as_ref(s, "solution") }?;
        let u = &s.solution.u;
        let g = energy(u.tri(), u, &s.problem.f, gamma)?;
        unsafe { put(out, g.total) }
    })
}

/// Runs the adaptive loop from `m` (or the problem's initial mesh if `m` is
/// null).
///
/// # Safety
/// Pointers must be valid; `m` may be null.
#[no_mangle]
pub unsafe extern "C" fn crafem_afem_run(
    p: *const CrafemProblem,
    m: *const CrafemMesh,
    params: *const CrafemAfemParams,
    out: *mut *mut CrafemAfemRun,
) -> CrafemStatus {
    guard(|| {
        let p = unsafe { as_ref(p, "problem") }?;
        let params = unsafe { as_ref(params, "params") }?;
        let initial = match unsafe { m.as_ref() } {
            Some(m) => m.0.clone(),
            None => p.0.initial_mesh()?,
        };
        let config = AfemConfig {
            mu: params.mu,
            gamma: params.gamma,
            max_elems: (params.max_elems > 0).then_some(params.max_elems),
            max_iters: (params.max_iters > 0).then_some(params.max_iters),
            tol: (params.tol > 0.0).then_some(params.tol),
            ..AfemConfig::default()
        };
        let run = afem_run_from(&p.0, &config, initial)?;
        unsafe { put(out, Box::into_raw(Box::new(CrafemAfemRun(run)))) }
    })
}

/// # Safety
/// `r` must be null or a run handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn crafem_afem_free(r: *mut CrafemAfemRun) {
    if !r.is_null() {
        drop(unsafe { Box::from_raw(r) });
    }
}

/// Number of iterations recorded.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_afem_num_rows(r: *const CrafemAfemRun, out: *mut usize) -> CrafemStatus {
    guard(|| {
        let r = unsafe { as_ref(r, "run") }?;
        unsafe { put(out, r.0.trace.rows.len()) }
    })
}

/// Row `i` of the trace.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_afem_row(r: *const CrafemAfemRun, i: usize, out: *mut CrafemAfemRow) -> CrafemStatus {
    guard(|| {
        let r = unsafe { as_ref(r, "run") }?;
        let row = r.0.trace.rows.get(i).ok_or_else(|| Fail(CrafemStatus::OutOfRange, format!("row {i}")))?;
        let c = CrafemAfemRow {
            iter: row.iter,
            n_elems: row.n_elems,
            n_sides: row.n_sides,
            n_marked: row.n_marked,
            eta_bar_sq: row.eta_bar_sq,
            eta_total_sq: row.eta_total_sq,
            energy: row.energy,
            err_ref: row.err_ref.unwrap_or(f64::NAN),
        };
        unsafe { put(out, c) }
    })
}

/// The final mesh of the run as a new handle.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn crafem_afem_last_mesh(r: *const CrafemAfemRun, out: *mut *mut CrafemMesh) -> CrafemStatus {
    guard(|| {
        let r = unsafe { as_ref(r, "run") }?;
        unsafe { put(out, Box::into_raw(Box::new(CrafemMesh(r.0.last.clone())))) }
    })
}
