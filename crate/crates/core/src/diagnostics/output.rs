use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Algorithm, ConvergenceTrace, DebugReport, StopReason, TraceRow};
use crate::error::Result;
use crate::fmt::{sig17, Sig17};

pub const TRACE_COLUMNS: [&str; 12] = [
    "k",
    "objective",
    "acc",
    "feas",
    "coupling_residual",
    "consensus_residual",
    "sum_p_norm",
    "ergodic_objective",
    "ergodic_gap",
    "inner_iterations",
    "inner_cap_hits",
    "inner_time_s",
];

const ACTIVITY_COLUMNS: [&str; 2] = ["active_agents", "active_edges"];

fn opt(v: Option<f64>) -> String {
    v.map(sig17).unwrap_or_default()
}

fn row_fields(row: &TraceRow, with_activity: bool) -> Vec<String> {
    let mut f = vec![
        row.k.to_string(),
        sig17(row.objective),
        opt(row.acc),
        sig17(row.feas),
        sig17(row.coupling_residual),
        sig17(row.consensus_residual),
        sig17(row.sum_p_norm),
        sig17(row.ergodic_objective),
        opt(row.ergodic_gap),
        row.inner.iterations.to_string(),
        row.inner.cap_hits.to_string(),
        sig17(row.inner.time),
    ];
    if with_activity {
        let (a, e) = row.active.unwrap_or_default();
        f.push(a.to_string());
        f.push(e.to_string());
    }
    f
}

/// Writes the trace as CSV with a header row. Randomized runs get two extra
/// activity columns.
pub fn write_trace_csv<W: Write>(trace: &ConvergenceTrace, w: W) -> Result<()> {
    let with_activity = trace.algorithm == Algorithm::Rpdc;
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = TRACE_COLUMNS.to_vec();
    if with_activity {
        header.extend(ACTIVITY_COLUMNS);
    }
    out.write_record(&header)?;
    for row in &trace.rows {
        out.write_record(row_fields(row, with_activity))?;
    }
    out.flush()?;
    Ok(())
}

/// JSON sidecar describing a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// "acc+feas" or "residual".
    pub stop_rule: String,
    pub wall_time: Sig17,
    /// Inner-solver time summed over agents and iterations.
    pub inner_time: Sig17,
    /// `inner_time / N`, the per-agent computation time.
    pub inner_time_per_agent: Sig17,
    pub final_objective: Option<Sig17>,
    pub final_acc: Option<Sig17>,
    pub final_feas: Option<Sig17>,
    pub obj_star: Option<Sig17>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debug: Option<DebugReport>,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl RunSummary {
    pub fn from_trace(t: &ConvergenceTrace) -> Self {
        let last = t.final_row();
        let finite = |v: f64| v.is_finite().then_some(Sig17(v));
        let inner_time = t.inner_time();
        let n = t.last.x.len().max(1) as f64;
        Self {
            algorithm: t.algorithm,
            iterations: t.iterations(),
            converged: t.stop.converged(),
            stop_reason: t.stop,
            stop_rule: if t.obj_star.is_some() { "acc+feas" } else { "residual" }.into(),
            wall_time: Sig17(t.wall_time),
            inner_time: Sig17(inner_time),
            inner_time_per_agent: Sig17(inner_time / n),
            final_objective: last.and_then(|r| finite(r.objective)),
            final_acc: last.and_then(|r| r.acc).and_then(finite),
            final_feas: last.and_then(|r| finite(r.feas)),
            obj_star: t.obj_star.map(Sig17),
            note: t.obj_star.is_none().then(|| {
                "no reference objective supplied; stopped on consensus + coupling + feasibility residuals".into()
            }),
            debug: t.debug.clone(),
            metadata: t.metadata.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{InnerStats, TraceRow};
    use crate::problem::{AgentData, CostFn, CoupledProblem, SimpleSet};
    use ndarray::{array, Array1, Array2};

    fn trace(alg: Algorithm) -> ConvergenceTrace {
        let agent = AgentData {
            e: array![[1.0]],
            c: Array2::zeros((0, 1)),
            d: Array1::zeros(0),
            cost: CostFn::SquaredL2,
            set: SimpleSet::FullSpace,
        };
        let p = CoupledProblem::new(array![2.0], vec![agent.clone(), agent]).unwrap();
        let mut t = ConvergenceTrace::new(alg, &p, None);
        t.rows.push(TraceRow {
            k: 1,
            objective: 0.1,
            acc: None,
            feas: 0.0,
            coupling_residual: 2.0,
            consensus_residual: 0.0,
            sum_p_norm: 0.0,
            ergodic_objective: 0.1,
            ergodic_gap: None,
            inner: InnerStats { iterations: 7, cap_hits: 0, time: 0.5 },
            active: Some((2, 1)),
        });
        t
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_trace_csv(&trace(Algorithm::Pdc), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), TRACE_COLUMNS.len());
        assert_eq!(row[0], "1");
        assert_eq!(row[1], "1.0000000000000001e-1");
        assert_eq!(row[2], "");
        assert_eq!(row[9], "7");

        let mut buf = Vec::new();
        write_trace_csv(&trace(Algorithm::Rpdc), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().ends_with("active_agents,active_edges"));
        assert!(text.lines().nth(1).unwrap().ends_with(",2,1"));
    }

    #[test]
    fn csv_parses_back() {
        let mut buf = Vec::new();
        write_trace_csv(&trace(Algorithm::Dc), &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rec = rdr.records().next().unwrap().unwrap();
        assert_eq!(rec[1].parse::<f64>().unwrap(), 0.1);
        assert_eq!(rec[11].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn summary_notes_residual_fallback() {
        let s = trace(Algorithm::Pdc).summary();
        assert_eq!(s.stop_rule, "residual");
        assert!(s.note.is_some());
        assert!(!s.converged);
        let json = s.to_json().unwrap();
        let back: RunSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.iterations, 1);
        assert_eq!(back.inner_time_per_agent.0, 0.25);
    }
}
