use std::ffi::{CStr, CString};
use std::ptr;

use dcmesh_ffi::*;

fn last_error() -> String {
    let p = dcm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn solve_round_trip() {
    unsafe {
        let mut prob = ptr::null_mut();
        assert_eq!(dcm_problem_generate_lasso(3, 5, 2, 3, 0.5, 7, &mut prob), DcmStatus::Ok);
        let n = dcm_problem_n_agents(prob);
        assert_eq!(n, 4);

        let mut graph = ptr::null_mut();
        assert_eq!(dcm_graph_random(n, 0.5, 1, &mut graph), DcmStatus::Ok);

        let (mut star, mut kkt, mut ok) = (0.0, 0.0, false);
        assert_eq!(dcm_reference_solve(prob, 1e-9, &mut star, &mut kkt, &mut ok), DcmStatus::Ok);
        assert!(ok && kkt <= 1e-9);

        let mut opts = dcm_solver_options_default();
        opts.stop_tol = 1e-5;
        let mut trace = ptr::null_mut();
        assert_eq!(dcm_solve(prob, graph, &opts, star, &mut trace), DcmStatus::Ok);
        assert!(dcm_trace_converged(trace));
        let iters = dcm_trace_iterations(trace);
        assert!(iters > 0);

        let mut row = DcmTraceRow {
            k: 0,
            objective: 0.0,
            acc: 0.0,
            feas: 0.0,
            coupling_residual: 0.0,
            consensus_residual: 0.0,
            inner_iterations: 0,
        };
        assert_eq!(dcm_trace_row(trace, iters - 1, &mut row), DcmStatus::Ok);
        assert_eq!(row.k, iters);
        assert!(row.acc.abs() + row.feas <= 1e-5);
        assert_eq!(dcm_trace_row(trace, iters, &mut row), DcmStatus::OutOfRange);

        let json = dcm_trace_summary_json(trace);
        assert!(!json.is_null());
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["iterations"], iters);
        dcm_string_free(json);

        dcm_trace_free(trace);
        dcm_graph_free(graph);
        dcm_problem_free(prob);
    }
}

#[test]
fn randomized_full_activity_matches_deterministic() {
    unsafe {
        let mut prob = ptr::null_mut();
        assert_eq!(dcm_problem_generate_load_control(3, 4, 2, 2, 3, &mut prob), DcmStatus::Ok);
        let edges: [usize; 6] = [0, 1, 1, 2, 2, 3];
        let mut graph = ptr::null_mut();
        assert_eq!(dcm_graph_from_edges(4, edges.as_ptr(), 3, &mut graph), DcmStatus::Ok);
        assert_eq!(dcm_graph_num_edges(graph), 3);

        let mut opts = dcm_solver_options_default();
        opts.max_iters = 25;
        opts.fixed_iterations = true;
        let mut a = ptr::null_mut();
        assert_eq!(dcm_solve(prob, graph, &opts, f64::NAN, &mut a), DcmStatus::Ok);
        opts.algorithm = DcmAlgorithm::Rpdc;
        let mut b = ptr::null_mut();
        assert_eq!(dcm_solve(prob, graph, &opts, f64::NAN, &mut b), DcmStatus::Ok);
        assert_eq!(dcm_trace_iterations(a), 25);
        let mut ra = std::mem::zeroed::<DcmTraceRow>();
        let mut rb = std::mem::zeroed::<DcmTraceRow>();
        for i in 0..25 {
            dcm_trace_row(a, i, &mut ra);
            dcm_trace_row(b, i, &mut rb);
            assert!(ra.acc.is_nan());
            assert_eq!(ra.objective.to_bits(), rb.objective.to_bits());
            assert_eq!(ra.feas.to_bits(), rb.feas.to_bits());
        }
        dcm_trace_free(a);
        dcm_trace_free(b);
        dcm_graph_free(graph);
        dcm_problem_free(prob);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut graph = ptr::null_mut();
        let edges: [usize; 2] = [0, 0];
        assert_eq!(dcm_graph_from_edges(2, edges.as_ptr(), 1, &mut graph), DcmStatus::InvalidArgument);
        assert!(graph.is_null());
        assert_eq!(dcm_graph_from_edges(3, [0usize, 1].as_ptr(), 1, &mut graph), DcmStatus::Ok);
        let mut small = ptr::null_mut();
        assert_eq!(dcm_problem_generate_lasso(2, 3, 2, 2, 0.5, 1, &mut small), DcmStatus::Ok);
        let mut t = ptr::null_mut();
        // node 2 is isolated, which only the solver rejects
        assert_eq!(dcm_solve(small, graph, ptr::null(), f64::NAN, &mut t), DcmStatus::Graph);
        assert!(t.is_null());
        dcm_graph_free(graph);
        dcm_problem_free(small);

        let missing = CString::new("/nonexistent/problem.json").unwrap();
        let mut prob = ptr::null_mut();
        assert_eq!(dcm_problem_load(missing.as_ptr(), &mut prob), DcmStatus::Io);
        assert_eq!(dcm_problem_load(ptr::null(), &mut prob), DcmStatus::NullPointer);
        assert_eq!(last_error(), "path is NULL");

        let mut trace = ptr::null_mut();
        assert_eq!(dcm_solve(ptr::null(), ptr::null(), ptr::null(), f64::NAN, &mut trace), DcmStatus::NullPointer);

        assert_eq!(dcm_problem_generate_lasso(2, 3, 2, 2, 0.5, 1, &mut prob), DcmStatus::Ok);
        assert_eq!(dcm_graph_random(3, 0.9, 0, &mut graph), DcmStatus::Ok);
        let mut opts = dcm_solver_options_default();
        opts.c = -1.0;
        assert_eq!(dcm_solve(prob, graph, &opts, f64::NAN, &mut trace), DcmStatus::InvalidArgument);
        assert_eq!(dcm_solve(prob, graph, ptr::null(), 0.0, &mut trace), DcmStatus::InvalidArgument);
        dcm_graph_free(graph);
        dcm_problem_free(prob);
        dcm_problem_free(ptr::null_mut());
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.json").to_str().unwrap()).unwrap();
    let csv = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    unsafe {
        let mut prob = ptr::null_mut();
        assert_eq!(dcm_problem_generate_lasso(2, 3, 2, 2, 0.5, 5, &mut prob), DcmStatus::Ok);
        assert_eq!(dcm_problem_save(prob, path.as_ptr()), DcmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(dcm_problem_load(path.as_ptr(), &mut back), DcmStatus::Ok);
        let mut graph = ptr::null_mut();
        assert_eq!(dcm_graph_random(3, 0.9, 0, &mut graph), DcmStatus::Ok);
        let mut opts = dcm_solver_options_default();
        opts.max_iters = 10;
        let mut t = ptr::null_mut();
        assert_eq!(dcm_solve(back, graph, &opts, f64::NAN, &mut t), DcmStatus::Ok);
        assert_eq!(dcm_trace_write_csv(t, csv.as_ptr()), DcmStatus::Ok);
        dcm_trace_free(t);
        dcm_graph_free(graph);
        dcm_problem_free(back);
        dcm_problem_free(prob);
    }
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.starts_with("k,objective,"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dcmesh.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["dcm_problem_load", "dcm_graph_random", "dcm_solve", "dcm_trace_row", "dcm_trace_free", "dcm_last_error"]
    {
        assert!(text.contains(f), "{f} missing from the header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ DcmSolverOptions o = dcm_solver_options_default(); DcmProblem *p = 0; \
             return dcm_problem_generate_lasso(2, 3, 2, 2, 0.5, 1, &p) == DCM_STATUS_OK ? (int)o.max_iters * 0 : 1; }}\n",
            header.display()
        ),
    )
    .unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
