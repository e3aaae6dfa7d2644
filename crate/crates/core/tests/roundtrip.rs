use dcmesh::diagnostics::write_trace_csv;
use dcmesh::netgraph::Graph;
use dcmesh::pdc_admm::{pdc_run, SolverConfig, StopRule};
use dcmesh::problem::{make_constrained_lasso, make_load_control, CoupledProblem};
use dcmesh::randomized::{rpdc_run, ActivityModel};
use proptest::prelude::*;

fn csv_text(t: &dcmesh::diagnostics::ConvergenceTrace) -> String {
    let mut buf = Vec::new();
    write_trace_csv(t, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Drops the wall-clock column so traces can be compared byte for byte.
fn without_timing(csv: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "inner_time_s").unwrap();
    lines
        .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != col).map(|(_, v)| v).collect::<Vec<_>>().join(","))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn problem_json_round_trips(seed in 0u64..1000, n in 1usize..4, lasso in any::<bool>()) {
        let p = if lasso {
            make_constrained_lasso(n, 3, 2, 2, 0.7, seed).unwrap().problem
        } else {
            make_load_control(n, 3, 2, 2, seed).unwrap().problem
        };
        let back = CoupledProblem::from_json(&p.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &p);
    }

    #[test]
    fn graph_json_round_trips(seed in 0u64..1000, n in 2usize..12) {
        let g = Graph::random_connected(n, 0.3, seed).unwrap();
        let back: Graph = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }
}

#[test]
fn trace_csv_values_round_trip() {
    let p = make_constrained_lasso(3, 4, 2, 3, 0.5, 2).unwrap().problem;
    let g = Graph::complete(4).unwrap();
    let cfg = SolverConfig { max_outer: 15, stop_rule: StopRule::Never, ..Default::default() };
    let t = pdc_run(&p, &g, &cfg, Some(1.0)).unwrap();
    let text = csv_text(&t);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 15);
    for (rec, row) in rows.iter().zip(&t.rows) {
        assert_eq!(rec[1].parse::<f64>().unwrap(), row.objective);
        assert_eq!(rec[2].parse::<f64>().unwrap(), row.acc.unwrap());
        assert_eq!(rec[3].parse::<f64>().unwrap(), row.feas);
    }
}

#[test]
fn runs_are_deterministic() {
    let p = make_constrained_lasso(4, 5, 2, 3, 0.5, 9).unwrap().problem;
    let g = Graph::random_connected(5, 0.4, 9).unwrap();
    let cfg = SolverConfig { max_outer: 40, stop_rule: StopRule::Never, seed: 3, ..Default::default() };
    let m = ActivityModel::uniform(5, 0.7, 0.3);
    let a = rpdc_run(&p, &g, &cfg, &m, None).unwrap();
    let b = rpdc_run(&p, &g, &cfg, &m, None).unwrap();
    assert_eq!(without_timing(&csv_text(&a)), without_timing(&csv_text(&b)));
    let c = rpdc_run(&p, &g, &SolverConfig { seed: 4, ..cfg }, &m, None).unwrap();
    assert_ne!(without_timing(&csv_text(&a)), without_timing(&csv_text(&c)));
}
