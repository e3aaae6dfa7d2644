//! Convergence traces, run summaries, invariant checks and the ergodic
//! rate certificate.

mod debug;
mod output;

pub use debug::{DebugReport, EdgeDualDebug};
pub use output::{write_trace_csv, RunSummary, TRACE_COLUMNS};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::Graph;
use crate::problem::{acc_metric, CoupledProblem, PrimalPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pdc,
    Dc,
    Rpdc,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pdc => "pdc",
            Algorithm::Dc => "dc",
            Algorithm::Rpdc => "rpdc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `|Acc| + Feas <= stop_tol` against the supplied reference objective.
    Accuracy,
    /// Consensus, coupling and polyhedra residuals all below `stop_tol`.
    Residual,
    MaxIterations,
}

impl StopReason {
    pub fn converged(&self) -> bool {
        !matches!(self, StopReason::MaxIterations)
    }
}

/// Inner-solver effort for one outer iteration, summed over the agents that ran.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerStats {
    pub iterations: usize,
    pub cap_hits: usize,
    /// Seconds.
    pub time: f64,
}

impl InnerStats {
    pub fn add(&mut self, report: &crate::subsolvers::InnerReport, seconds: f64) {
        self.iterations += report.iterations;
        self.cap_hits += usize::from(report.hit_cap);
        self.time += seconds;
    }
}

/// One trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub objective: f64,
    pub acc: Option<f64>,
    pub feas: f64,
    /// `||sum_i E_i x_i - q||_2`.
    pub coupling_residual: f64,
    /// `max over edges ||y_i - y_j||_2`.
    pub consensus_residual: f64,
    /// `||sum_i p_i||_inf`.
    pub sum_p_norm: f64,
    pub ergodic_objective: f64,
    /// `|F(x_bar) - F*| + ||sum E x_bar - q|| + sum ||C x_bar + r_bar - d||`.
    pub ergodic_gap: Option<f64>,
    pub inner: InnerStats,
    /// Active agents and edges, randomized runs only.
    pub active: Option<(usize, usize)>,
}

impl TraceRow {
    /// Quantity the stopping rule compares with `stop_tol`.
    pub fn stop_metric(&self) -> f64 {
        match self.acc {
            Some(acc) => acc.abs() + self.feas,
            None => self.consensus_residual + self.coupling_residual + self.feas,
        }
    }
}

/// Running means `x_bar^k = ((k-1) x_bar^{k-1} + x^k) / k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAverage {
    pub count: usize,
    pub point: PrimalPoint,
}

impl ErgodicAverage {
    pub fn new(p: &CoupledProblem) -> Self {
        Self { count: 0, point: PrimalPoint::zeros(p) }
    }

    pub fn push(&mut self, x: &[Array1<f64>], r: &[Array1<f64>]) {
        self.count += 1;
        let k = self.count as f64;
        let blend = |avg: &mut Array1<f64>, new: &Array1<f64>| {
            avg.zip_mut_with(new, |a, &v| *a = ((k - 1.0) * *a + v) / k);
        };
        self.point.x.iter_mut().zip(x).for_each(|(a, v)| blend(a, v));
        self.point.r.iter_mut().zip(r).for_each(|(a, v)| blend(a, v));
    }
}

/// Everything an outer iteration hands to the recorder.
#[derive(Debug, Clone, Copy)]
pub struct IterationSnapshot<'a> {
    pub k: usize,
    pub x: &'a [Array1<f64>],
    pub r: &'a [Array1<f64>],
    pub y: &'a [Array1<f64>],
    pub p: &'a [Array1<f64>],
    pub inner: InnerStats,
    pub active: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub algorithm: Algorithm,
    pub obj_star: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub ergodic: ErgodicAverage,
    /// Last primal iterate.
    pub last: PrimalPoint,
    pub last_y: Vec<Array1<f64>>,
    pub stop: StopReason,
    pub debug: Option<DebugReport>,
    /// Seconds for the whole run, including bookkeeping.
    pub wall_time: f64,
    /// Algorithm configuration and seeds.
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl ConvergenceTrace {
    pub fn new(algorithm: Algorithm, problem: &CoupledProblem, obj_star: Option<f64>) -> Self {
        Self {
            algorithm,
            obj_star,
            rows: Vec::new(),
            ergodic: ErgodicAverage::new(problem),
            last: PrimalPoint::zeros(problem),
            last_y: vec![Array1::zeros(problem.l()); problem.n_agents()],
            stop: StopReason::MaxIterations,
            debug: None,
            wall_time: 0.0,
            metadata: serde_json::Map::new(),
        }
    }

    /// Appends the metrics of one iteration.
    pub fn record(&mut self, problem: &CoupledProblem, graph: &Graph, snap: &IterationSnapshot) -> &TraceRow {
        if let Some(prev) = self.rows.last() {
            debug_assert!(snap.k > prev.k, "trace rows must have increasing k");
        }
        self.ergodic.push(snap.x, snap.r);
        let objective = problem.objective_x(snap.x);
        let acc = self.obj_star.and_then(|s| acc_metric(objective, s).ok());
        let coupling = problem.coupling_residual_x(snap.x);
        let consensus_residual = graph
            .edges()
            .iter()
            .map(|&(i, j)| {
                let d = &snap.y[i] - &snap.y[j];
                d.dot(&d).sqrt()
            })
            .fold(0.0, f64::max);
        let mut sum_p = Array1::<f64>::zeros(problem.l());
        for p in snap.p {
            sum_p += p;
        }
        let ergodic_objective = problem.objective_x(&self.ergodic.point.x);
        let ergodic_gap = self.obj_star.map(|s| ergodic_gap(problem, &self.ergodic.point, s));

        self.rows.push(TraceRow {
            k: snap.k,
            objective,
            acc,
            feas: problem.feas_x(snap.x),
            coupling_residual: coupling.dot(&coupling).sqrt(),
            consensus_residual,
            sum_p_norm: sum_p.iter().fold(0.0, |m, v| m.max(v.abs())),
            ergodic_objective,
            ergodic_gap,
            inner: snap.inner,
            active: snap.active,
        });
        self.last.x.clone_from_slice(snap.x);
        self.last.r.clone_from_slice(snap.r);
        self.last_y.clone_from_slice(snap.y);
        self.rows.last().expect("row was just pushed")
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Sum of per-agent inner-solver time over the run, in seconds.
    pub fn inner_time(&self) -> f64 {
        self.rows.iter().map(|r| r.inner.time).sum()
    }

    /// First iteration whose stop metric is at most `tol`.
    pub fn first_below(&self, tol: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.stop_metric() <= tol).map(|r| r.k)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::from_trace(self)
    }
}

/// Left side of the ergodic bound at `avg`.
pub fn ergodic_gap(problem: &CoupledProblem, avg: &PrimalPoint, obj_star: f64) -> f64 {
    let obj_gap = (problem.objective_x(&avg.x) - obj_star).abs();
    let coupling = problem.coupling_residual_x(&avg.x);
    let poly: f64 = problem
        .agents
        .iter()
        .zip(avg.x.iter().zip(&avg.r))
        .map(|(a, (x, r))| {
            let res = a.c.dot(x) + r - &a.d;
            res.dot(&res).sqrt()
        })
        .sum();
    obj_gap + coupling.dot(&coupling).sqrt() + poly
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    /// `sup_M M * ergodic_gap(M)`.
    pub sup: f64,
    pub median: f64,
    pub samples: usize,
}

impl RateCertificate {
    pub fn ratio(&self) -> f64 {
        if self.median > 0.0 {
            self.sup / self.median
        } else if self.sup == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    }
}

/// Statistics of `M * ergodic_gap(M)` over trace rows with `m_lo <= k <= m_hi`.
pub fn rate_certificate(trace: &ConvergenceTrace, m_lo: usize, m_hi: usize) -> Result<RateCertificate> {
    if trace.obj_star.is_none() {
        return Err(Error::MissingReference);
    }
    let mut scaled: Vec<f64> = trace
        .rows
        .iter()
        .filter(|r| r.k >= m_lo && r.k <= m_hi)
        .filter_map(|r| r.ergodic_gap.map(|g| r.k as f64 * g))
        .collect();
    if scaled.is_empty() {
        return Err(Error::InvalidArgument(format!("trace has no rows with {m_lo} <= k <= {m_hi}")));
    }
    scaled.sort_by(f64::total_cmp);
    let n = scaled.len();
    let median = if n % 2 == 1 { scaled[n / 2] } else { 0.5 * (scaled[n / 2 - 1] + scaled[n / 2]) };
    Ok(RateCertificate { sup: scaled[n - 1], median, samples: n })
}
