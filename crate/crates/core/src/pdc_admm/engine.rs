use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;

use super::{
    p_update, pdc_agent_step, pdc_local_solver, AgentState, AgentStep, SolverConfig, StopRule, DEFAULT_STOP_WINDOW,
};
use crate::dc_admm::{dc_agent_step, dc_local_solver};
use crate::diagnostics::{
    Algorithm, ConvergenceTrace, DebugReport, EdgeDualDebug, InnerStats, IterationSnapshot, StopReason,
};
use crate::error::{Error, Result};
use crate::netgraph::Graph;
use crate::problem::CoupledProblem;
use crate::randomized::{sample_activity, ActivityModel, ActivitySample};
use crate::subsolvers::{BsumSolver, InnerAdmmSolver, InnerAdmmState};

/// How the agent subproblem treats `C_i x_i <= d_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubproblemKind {
    /// Soft: slack plus proximal dual, solved by BSUM.
    Proximal,
    /// Hard: solved by the inner ADMM.
    Constrained,
}

/// Iterates of the whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub agents: Vec<AgentState>,
    /// Edge midpoints `t_e = (y_i + y_j)/2`, one per edge id.
    pub t: Vec<Array1<f64>>,
}

impl NetworkState {
    pub fn zeros(problem: &CoupledProblem, graph: &Graph) -> Self {
        let l = problem.l();
        let agents = problem.agents.iter().map(|a| AgentState::zeros(a.k(), a.p(), l)).collect();
        let mut s = Self { agents, t: Vec::new() };
        s.t = graph.edges().iter().map(|&(i, j)| s.midpoint(i, j)).collect();
        s
    }

    fn midpoint(&self, i: usize, j: usize) -> Array1<f64> {
        (&self.agents[i].y + &self.agents[j].y) * 0.5
    }

    /// `2 sum_{e ~ i} t_e`.
    pub fn neighbor_term(&self, graph: &Graph, i: usize) -> Array1<f64> {
        let mut s = Array1::<f64>::zeros(self.agents[i].y.len());
        for &e in graph.inc(i) {
            s += &self.t[e];
        }
        s * 2.0
    }

    fn column<F: Fn(&AgentState) -> &Array1<f64>>(&self, f: F) -> Vec<Array1<f64>> {
        self.agents.iter().map(|a| f(a).clone()).collect()
    }
}

enum Local {
    Bsum(BsumSolver),
    Admm(InnerAdmmSolver, InnerAdmmState),
}

/// Shared outer iteration for all three methods.
pub struct OuterSolver<'a> {
    problem: &'a CoupledProblem,
    graph: &'a Graph,
    cfg: SolverConfig,
    kind: SubproblemKind,
    state: NetworkState,
    locals: Vec<Local>,
    duals: Option<EdgeDualDebug>,
    report: Option<DebugReport>,
    k: usize,
}

impl<'a> OuterSolver<'a> {
    pub fn new(
        problem: &'a CoupledProblem,
        graph: &'a Graph,
        cfg: &SolverConfig,
        kind: SubproblemKind,
    ) -> Result<Self> {
        problem.validate()?;
        cfg.validate(problem.n_agents())?;
        if graph.n() != problem.n_agents() {
            return Err(Error::Dimension(format!(
                "graph has {} nodes but the problem has {} agents",
                graph.n(),
                problem.n_agents()
            )));
        }
        graph.validate_for_solver()?;
        let locals = (0..problem.n_agents())
            .map(|i| {
                let deg = graph.degree(i);
                Ok(match kind {
                    SubproblemKind::Proximal => Local::Bsum(pdc_local_solver(problem, i, deg, cfg)?),
                    SubproblemKind::Constrained => {
                        Local::Admm(dc_local_solver(problem, i, deg, cfg)?, InnerAdmmState::new(0))
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            problem,
            graph,
            cfg: cfg.clone(),
            kind,
            state: NetworkState::zeros(problem, graph),
            locals,
            duals: cfg.debug.then(|| EdgeDualDebug::new(graph, problem.l())),
            report: cfg.debug.then(DebugReport::default),
            k: 0,
        })
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn debug_report(&self) -> Option<&DebugReport> {
        self.report.as_ref()
    }

    pub fn edge_duals(&self) -> Option<&EdgeDualDebug> {
        self.duals.as_ref()
    }

    /// One outer iteration with the given activity. Idle agents and inactive
    /// edges keep their values.
    pub fn step(&mut self, sample: &ActivitySample) -> Result<InnerStats> {
        let (n, m) = (self.problem.n_agents(), self.graph.num_edges());
        if sample.omega.len() != n || sample.psi.len() != m {
            return Err(Error::Dimension("activity sample does not match the graph".into()));
        }
        let frozen = self.cfg.debug.then(|| self.idle_snapshot(sample));
        let record = self.cfg.debug && self.kind == SubproblemKind::Proximal && self.cfg.beta_factor >= 1.01;

        // local updates read only edge values, so agents are independent
        let (problem, graph, cfg, state) = (self.problem, self.graph, &self.cfg, &self.state);
        let work = |(i, local): (usize, &mut Local)| -> Result<Option<AgentStep>> {
            if !sample.omega[i] {
                return Ok(None);
            }
            let term = state.neighbor_term(graph, i);
            let deg = graph.degree(i);
            let current = &state.agents[i];
            match local {
                Local::Bsum(s) => pdc_agent_step(problem, i, deg, current, term.view(), cfg, s, record).map(Some),
                Local::Admm(s, inner) => dc_agent_step(problem, i, deg, current, term.view(), cfg, s, inner).map(Some),
            }
        };
        let steps: Vec<Result<Option<AgentStep>>> = if self.cfg.parallel {
            self.locals.par_iter_mut().enumerate().map(work).collect()
        } else {
            self.locals.iter_mut().enumerate().map(work).collect()
        };

        let mut stats = InnerStats::default();
        for (i, step) in steps.into_iter().enumerate() {
            if let Some(step) = step? {
                stats.add(&step.report, step.inner_time);
                if let Some(rep) = self.report.as_mut() {
                    rep.observe_bsum_trace(&step.bsum_objective);
                }
                self.state.agents[i] = step.state;
            }
        }

        // barrier: every active y is published
        for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
            if sample.psi[e] {
                self.state.t[e] = self.state.midpoint(i, j);
            }
        }
        let c = self.cfg.c;
        for i in (0..n).filter(|&i| sample.omega[i]) {
            let active: Vec<(usize, usize)> =
                self.graph.inc(i).iter().enumerate().filter(|&(_, &e)| sample.psi[e]).map(|(s, &e)| (s, e)).collect();
            let agent = &mut self.state.agents[i];
            p_update(&mut agent.p, c, &agent.y, active.iter().map(|&(_, e)| &self.state.t[e]));
            if let Some(d) = self.duals.as_mut() {
                for &(slot, e) in &active {
                    d.step(self.graph, i, slot, c, &agent.y, &self.state.t[e]);
                }
            }
        }

        self.k += 1;
        if let Some(frozen) = frozen {
            self.check_invariants(sample, &frozen);
        }
        Ok(stats)
    }

    fn idle_snapshot(&self, sample: &ActivitySample) -> Vec<(usize, AgentState, Vec<Array1<f64>>)> {
        (0..self.problem.n_agents())
            .filter(|&i| !sample.omega[i])
            .map(|i| {
                let t = self.graph.inc(i).iter().map(|&e| self.state.t[e].clone()).collect();
                (i, self.state.agents[i].clone(), t)
            })
            .collect()
    }

    fn check_invariants(&mut self, sample: &ActivitySample, frozen: &[(usize, AgentState, Vec<Array1<f64>>)]) {
        let Some(rep) = self.report.as_mut() else { return };
        let (g, st) = (self.graph, &self.state);
        rep.iterations_checked += 1;
        let p: Vec<Array1<f64>> = st.column(|a| &a.p);
        rep.observe_sum_p(&p);
        if let Some(d) = &self.duals {
            rep.observe_edge_duals(d, g, &p);
        }
        for i in 0..g.n() {
            for (slot, &j) in g.nbrs(i).iter().enumerate() {
                let back = g.slot_of(j, i).expect("graph adjacency is symmetric");
                let e = g.inc(i)[slot];
                let seen_from_j = &st.t[g.inc(j)[back]];
                let fresh = sample.psi[e] && st.t[e] != (&st.agents[j].y + &st.agents[i].y) * 0.5;
                if *seen_from_j != st.t[e] || fresh {
                    rep.t_asymmetries += 1;
                }
            }
        }
        for (a, data) in st.agents.iter().zip(&self.problem.agents) {
            if !data.set.contains(a.x.view()) {
                rep.set_violations += 1;
            }
            rep.negative_slacks += a.r.iter().filter(|&&v| v < 0.0).count();
        }
        for (i, before, t_before) in frozen {
            let t_now = g.inc(*i).iter().map(|&e| &st.t[e]);
            if &st.agents[*i] != before || t_now.zip(t_before).any(|(a, b)| a != b) {
                rep.idle_changes += 1;
            }
        }
    }

    fn snapshot_into(&self, trace: &mut ConvergenceTrace, stats: InnerStats, active: Option<(usize, usize)>) {
        let st = &self.state;
        let (x, r, y, p) = (st.column(|a| &a.x), st.column(|a| &a.r), st.column(|a| &a.y), st.column(|a| &a.p));
        trace.record(
            self.problem,
            self.graph,
            &IterationSnapshot { k: self.k, x: &x, r: &r, y: &y, p: &p, inner: stats, active },
        );
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub(crate) fn run(
    problem: &CoupledProblem,
    graph: &Graph,
    cfg: &SolverConfig,
    algorithm: Algorithm,
    activity: Option<&ActivityModel>,
    obj_star: Option<f64>,
) -> Result<ConvergenceTrace> {
    let start = Instant::now();
    if let Some(s) = obj_star {
        if s == 0.0 {
            return Err(Error::ZeroReference);
        }
        if !s.is_finite() {
            return Err(Error::NonFinite("reference objective"));
        }
    }
    if let Some(m) = activity {
        m.validate(graph)?;
    }
    let kind = match algorithm {
        Algorithm::Dc => SubproblemKind::Constrained,
        Algorithm::Pdc | Algorithm::Rpdc => SubproblemKind::Proximal,
    };
    let mut solver = OuterSolver::new(problem, graph, cfg, kind)?;
    let randomized = activity.filter(|m| !m.is_full());
    let rule = match cfg.stop_rule {
        StopRule::Auto if randomized.is_some() => StopRule::WindowMedian { window: DEFAULT_STOP_WINDOW },
        StopRule::Auto => StopRule::Immediate,
        r => r,
    };

    let mut trace = ConvergenceTrace::new(algorithm, problem, obj_star);
    let mut meta = match serde_json::to_value(cfg)? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("config serializes as an object"),
    };
    meta.insert("algorithm".into(), algorithm.name().into());
    meta.insert("n_agents".into(), problem.n_agents().into());
    meta.insert("n_edges".into(), graph.num_edges().into());
    meta.insert("effective_stop_rule".into(), serde_json::to_value(rule)?);
    if let Some(m) = activity {
        meta.insert("activity".into(), serde_json::to_value(m)?);
    }
    trace.metadata = meta;

    let full = ActivitySample::full(graph);
    let mut metrics = Vec::new();
    for k in 1..=cfg.max_outer {
        let sample = match activity {
            Some(m) => sample_activity(m, graph, k, cfg.seed),
            None => full.clone(),
        };
        let stats = solver.step(&sample)?;
        let active = activity.map(|_| (sample.active_agents(), sample.active_edges()));
        solver.snapshot_into(&mut trace, stats, active);
        let row = trace.rows.last().expect("row recorded");
        if !row.objective.is_finite() {
            log::warn!("objective became non-finite at iteration {k}; stopping");
            break;
        }
        metrics.push(row.stop_metric());
        let stop = match rule {
            StopRule::Immediate => metrics[k - 1] <= cfg.stop_tol,
            StopRule::WindowMedian { window } => k >= window && median(&metrics[k - window..]) <= cfg.stop_tol,
            StopRule::Never | StopRule::Auto => false,
        };
        if stop {
            trace.stop = if obj_star.is_some() { StopReason::Accuracy } else { StopReason::Residual };
            break;
        }
    }
    trace.debug = solver.report.take();
    trace.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}
