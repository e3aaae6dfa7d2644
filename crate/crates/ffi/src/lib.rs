//! C ABI for dcmesh.
//!
//! Problems, graphs and run traces are opaque handles owned by the caller
//! and released with the matching `*_free`. Every fallible call returns a
//! [`DcmStatus`]; the message of the last failure on the calling thread is
//! available from [`dcm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dcmesh::cli::run_algorithm;
use dcmesh::diagnostics::{write_trace_csv, Algorithm, ConvergenceTrace};
use dcmesh::netgraph::Graph;
use dcmesh::oracle::reference_solve;
use dcmesh::pdc_admm::{SolverConfig, StopRule};
use dcmesh::problem::{make_constrained_lasso, make_load_control, CoupledProblem};
use dcmesh::randomized::ActivityModel;
use dcmesh::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Graph = 4,
    Io = 5,
    Parse = 6,
    Numeric = 7,
    OutOfRange = 8,
    Panic = 9,
}

impl From<&Error> for DcmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) | Error::NotSquare { .. } => DcmStatus::Dimension,
            Error::InvalidArgument(_) | Error::ZeroReference | Error::MissingReference => DcmStatus::InvalidArgument,
            Error::NodeOutOfRange { .. }
            | Error::Disconnected
            | Error::IsolatedNode(_)
            | Error::GraphSampling { .. } => DcmStatus::Graph,
            Error::NonFinite(_) => DcmStatus::Numeric,
            Error::Io(_) => DcmStatus::Io,
            Error::Json(_) | Error::Csv(_) => DcmStatus::Parse,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcmAlgorithm {
    Pdc = 0,
    Dc = 1,
    Rpdc = 2,
}

impl From<DcmAlgorithm> for Algorithm {
    fn from(a: DcmAlgorithm) -> Self {
        match a {
            DcmAlgorithm::Pdc => Algorithm::Pdc,
            DcmAlgorithm::Dc => Algorithm::Dc,
            DcmAlgorithm::Rpdc => Algorithm::Rpdc,
        }
    }
}

/// Solver settings. Start from [`dcm_solver_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmSolverOptions {
    pub algorithm: DcmAlgorithm,
    pub c: f64,
    /// Proximal parameter; a value `<= 0` means `tau = c`.
    pub tau: f64,
    pub eps_inner: f64,
    pub beta_factor: f64,
    pub c1: f64,
    pub inner_cap: usize,
    pub max_iters: usize,
    pub stop_tol: f64,
    /// Run every iteration up to `max_iters` and ignore `stop_tol`.
    pub fixed_iterations: bool,
    pub seed: u64,
    /// Agent ON probability (randomized method).
    pub alpha: f64,
    /// Link failure probability (randomized method).
    pub pe: f64,
    pub debug: bool,
}

/// One row of a run trace. `acc` is NaN when no reference objective was given.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmTraceRow {
    pub k: usize,
    pub objective: f64,
    pub acc: f64,
    pub feas: f64,
    pub coupling_residual: f64,
    pub consensus_residual: f64,
    pub inner_iterations: usize,
}

pub struct DcmProblem(CoupledProblem);
pub struct DcmGraph(Graph);
pub struct DcmTrace(ConvergenceTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (DcmStatus, String)>) -> DcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DcmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside dcmesh".into());
            DcmStatus::Panic
        }
    }
}

fn lib<T>(r: dcmesh::Result<T>) -> Result<T, (DcmStatus, String)> {
    r.map_err(|e| (DcmStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (DcmStatus, String) {
    (DcmStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, (DcmStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| (DcmStatus::InvalidArgument, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, (DcmStatus, String)> {
    h.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dcm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from a dcmesh call and not have been freed yet.
#[no_mangle]
pub unsafe extern "C" fn dcm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a problem from its JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcm_problem_load(path: *const c_char, out: *mut *mut DcmProblem) -> DcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = lib(CoupledProblem::load(path_arg(path)?))?;
        put(out, DcmProblem(p));
        Ok(())
    })
}

/// Saves a problem as JSON.
///
/// # Safety
/// `problem` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dcm_problem_save(problem: *const DcmProblem, path: *const c_char) -> DcmStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        lib(p.0.save(path_arg(path)?))
    })
}

/// Random constrained LASSO instance with `n_agents + 1` agents.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcm_problem_generate_lasso(
    n_agents: usize,
    k: usize,
    l: usize,
    p: usize,
    lambda: f64,
    seed: u64,
    out: *mut *mut DcmProblem,
) -> DcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = lib(make_constrained_lasso(n_agents, k, l, p, lambda, seed))?;
        put(out, DcmProblem(g.problem));
        Ok(())
    })
}

/// Random load control instance with `n_agents + 1` agents.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcm_problem_generate_load_control(
    n_agents: usize,
    k: usize,
    l: usize,
    p: usize,
    seed: u64,
    out: *mut *mut DcmProblem,
) -> DcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = lib(make_load_control(n_agents, k, l, p, seed))?;
        put(out, DcmProblem(g.problem));
        Ok(())
    })
}

/// Number of agents, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcm_problem_n_agents(problem: *const DcmProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.n_agents())
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcm_problem_free(problem: *mut DcmProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Connected Erdos-Renyi graph on `n` nodes.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcm_graph_random(n: usize, edge_prob: f64, seed: u64, out: *mut *mut DcmGraph) -> DcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, DcmGraph(lib(Graph::random_connected(n, edge_prob, seed))?));
        Ok(())
    })
}

/// Graph from `n_edges` node pairs stored flat in `edges` (`2 * n_edges` entries).
///
/// # Safety
/// `edges` must point to `2 * n_edges` readable values (or be NULL when
/// `n_edges` is 0) and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcm_graph_from_edges(
    n: usize,
    edges: *const usize,
    n_edges: usize,
    out: *mut *mut DcmGraph,
) -> DcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let flat: &[usize] = if n_edges == 0 {
            &[]
        } else if edges.is_null() {
            return Err(null("edges"));
        } else {
            std::slice::from_raw_parts(edges, 2 * n_edges)
        };
        let g = lib(Graph::new(n, flat.chunks_exact(2).map(|e| (e[0], e[1]))))?;
        put(out, DcmGraph(g));
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcm_graph_num_edges(graph: *const DcmGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_edges())
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcm_graph_free(graph: *mut DcmGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

#[no_mangle]
pub extern "C" fn dcm_solver_options_default() -> DcmSolverOptions {
    let d = SolverConfig::default();
    DcmSolverOptions {
        algorithm: DcmAlgorithm::Pdc,
        c: d.c,
        tau: 0.0,
        eps_inner: d.eps_inner,
        beta_factor: d.beta_factor,
        c1: d.c1,
        inner_cap: d.inner_cap,
        max_iters: d.max_outer,
        stop_tol: d.stop_tol,
        fixed_iterations: false,
        seed: d.seed,
        alpha: 1.0,
        pe: 0.0,
        debug: false,
    }
}

fn solver_config(o: &DcmSolverOptions) -> SolverConfig {
    SolverConfig {
        c: o.c,
        tau: (o.tau > 0.0).then_some(o.tau),
        eps_inner: o.eps_inner,
        beta_factor: o.beta_factor,
        c1: o.c1,
        inner_cap: o.inner_cap,
        max_outer: o.max_iters,
        stop_tol: o.stop_tol,
        stop_rule: if o.fixed_iterations { StopRule::Never } else { StopRule::Auto },
        seed: o.seed,
        debug: o.debug,
        ..SolverConfig::default()
    }
}

/// Runs one solve. `obj_star` is the reference objective, or NaN for none.
/// `options` may be NULL for the defaults.
///
/// # Safety
/// `problem` and `graph` must be live handles, `options` NULL or readable,
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dcm_solve(
    problem: *const DcmProblem,
    graph: *const DcmGraph,
    options: *const DcmSolverOptions,
    obj_star: f64,
    out: *mut *mut DcmTrace,
) -> DcmStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let g = handle(graph, "graph")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = options.as_ref().copied().unwrap_or_else(|| dcm_solver_options_default());
        let cfg = solver_config(&o);
        let activity = ActivityModel::uniform(p.0.n_agents(), o.alpha, o.pe);
        let star = (!obj_star.is_nan()).then_some(obj_star);
        let trace = lib(run_algorithm(o.algorithm.into(), &p.0, &g.0, &cfg, Some(&activity), star))?;
        put(out, DcmTrace(trace));
        Ok(())
    })
}

/// High-accuracy reference solve. Writes the optimal value and the KKT
/// residual reached; either output may be NULL.
///
/// # Safety
/// `problem` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcm_reference_solve(
    problem: *const DcmProblem,
    tol: f64,
    obj_star: *mut f64,
    kkt: *mut f64,
    converged: *mut bool,
) -> DcmStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let sol = lib(reference_solve(&p.0, tol))?;
        if let Some(o) = obj_star.as_mut() {
            *o = sol.obj_star;
        }
        if let Some(k) = kkt.as_mut() {
            *k = sol.kkt;
        }
        if let Some(c) = converged.as_mut() {
            *c = sol.converged;
        }
        Ok(())
    })
}

/// Number of recorded iterations, or 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcm_trace_iterations(trace: *const DcmTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.iterations())
}

/// Whether the stop rule fired before the iteration cap.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcm_trace_converged(trace: *const DcmTrace) -> bool {
    trace.as_ref().is_some_and(|t| t.0.stop.converged())
}

/// Copies row `index` (0-based) of the trace into `row`.
///
/// # Safety
/// `trace` must be a live handle and `row` writable.
#[no_mangle]
pub unsafe extern "C" fn dcm_trace_row(trace: *const DcmTrace, index: usize, row: *mut DcmTraceRow) -> DcmStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        let out = row.as_mut().ok_or_else(|| null("row"))?;
        let r =
            t.0.rows.get(index).ok_or_else(|| {
                (DcmStatus::OutOfRange, format!("row {index} out of range for {} rows", t.0.rows.len()))
            })?;
        *out = DcmTraceRow {
            k: r.k,
            objective: r.objective,
            acc: r.acc.unwrap_or(f64::NAN),
            feas: r.feas,
            coupling_residual: r.coupling_residual,
            consensus_residual: r.consensus_residual,
            inner_iterations: r.inner.iterations,
        };
        Ok(())
    })
}

/// Writes the trace as CSV.
///
/// # Safety
/// `trace` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dcm_trace_write_csv(trace: *const DcmTrace, path: *const c_char) -> DcmStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        let file = std::fs::File::create(path_arg(path)?).map_err(|e| (DcmStatus::Io, e.to_string()))?;
        lib(write_trace_csv(&t.0, std::io::BufWriter::new(file)))
    })
}

/// Run summary as a JSON string; free it with [`dcm_string_free`]. NULL on failure.
///
/// # Safety
/// `trace` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcm_trace_summary_json(trace: *const DcmTrace) -> *mut c_char {
    let mut json = None;
    let status = guard(|| {
        let t = handle(trace, "trace")?;
        let s = lib(t.0.summary().to_json())?;
        json = Some(CString::new(s).map_err(|e| (DcmStatus::Parse, e.to_string()))?);
        Ok(())
    });
    match (status, json) {
        (DcmStatus::Ok, Some(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcm_trace_free(trace: *mut DcmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
