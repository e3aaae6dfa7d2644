//! Proximal dual consensus ADMM.
//!
//! Every agent keeps a local copy `y_i` of the coupling dual. One outer
//! iteration is
//!
//! 1. `(x_i, r_i)` from the BSUM subsolver,
//! 2. `y_i = (S_i - p_i/c + (E_i x_i - q/N)/c) / (2|N_i|)`,
//! 3. `z_i += (C_i x_i + r_i - d_i) / tau_i`,
//! 4. barrier, then `p_i += c sum_j (y_i - y_j)`.
//!
//! `S_i = sum_j (y_i + y_j)` is kept in its edge form `2 sum_j t_ij` with
//! `t_ij = (y_i + y_j)/2` stored once per edge, and step 4 is applied as
//! `p_i += 2c sum_j (y_i - t_ij)`. Both are the same numbers as the plain
//! form, and they are what the randomized variant needs, so all three
//! methods share one iteration engine ([`OuterSolver`]).

mod config;
pub(crate) mod engine;

pub use config::{SolverConfig, StopRule, DEFAULT_STOP_WINDOW};
pub use engine::{NetworkState, OuterSolver, SubproblemKind};

use std::time::Instant;

use ndarray::{Array1, ArrayView1};

use crate::diagnostics::{Algorithm, ConvergenceTrace};
use crate::error::Result;
use crate::netgraph::Graph;
use crate::problem::CoupledProblem;
use crate::subsolvers::{BsumSolver, ConsensusTerm, InnerReport, QuadSubproblem};

/// Iterates of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Array1<f64>,
    /// Polyhedra slack. DC-ADMM stores `max(d - C x, 0)` here for reporting.
    pub r: Array1<f64>,
    pub y: Array1<f64>,
    /// Polyhedra dual; stays zero in DC-ADMM.
    pub z: Array1<f64>,
    /// Aggregated edge dual.
    pub p: Array1<f64>,
}

impl AgentState {
    pub fn zeros(k: usize, p_rows: usize, l: usize) -> Self {
        Self {
            x: Array1::zeros(k),
            r: Array1::zeros(p_rows),
            y: Array1::zeros(l),
            z: Array1::zeros(p_rows),
            p: Array1::zeros(l),
        }
    }
}

/// Result of one agent's local update (everything except `p`).
#[derive(Debug, Clone)]
pub struct AgentStep {
    pub state: AgentState,
    pub report: InnerReport,
    /// Seconds spent in the subsolver.
    pub inner_time: f64,
    /// BSUM subproblem objective per sweep, when requested.
    pub bsum_objective: Vec<f64>,
}

/// `sum_j (y_i + y_j)` from explicit neighbor values.
pub fn neighbor_sum<'a>(
    y_i: ArrayView1<f64>,
    neighbor_y: impl IntoIterator<Item = ArrayView1<'a, f64>>,
) -> Array1<f64> {
    let mut s = Array1::zeros(y_i.len());
    for yj in neighbor_y {
        s += &y_i;
        s += &yj;
    }
    s
}

pub(crate) fn consensus_term<'a>(
    problem: &'a CoupledProblem,
    i: usize,
    degree: usize,
    c: f64,
    p_prev: &'a Array1<f64>,
    neighbor_term: ArrayView1<'a, f64>,
) -> ConsensusTerm<'a> {
    ConsensusTerm {
        agent: &problem.agents[i],
        c,
        degree,
        n_agents: problem.n_agents(),
        q: problem.q.view(),
        p_prev: p_prev.view(),
        neighbor_term,
    }
}

/// Local dual update `y_i = (E_i x_i / c + w0) / (2|N_i|)`, shared by all methods.
pub fn y_update(term: &ConsensusTerm, x: ArrayView1<f64>) -> Array1<f64> {
    let mut w = term.agent.e.dot(&x) / term.c;
    w += &term.offset();
    w / (2.0 * term.degree as f64)
}

/// `p_i += 2c sum_e (y_i - t_e)` over the given edge values.
pub fn p_update<'a>(p: &mut Array1<f64>, c: f64, y_i: &Array1<f64>, t: impl IntoIterator<Item = &'a Array1<f64>>) {
    let mut acc = Array1::<f64>::zeros(y_i.len());
    for te in t {
        acc += y_i;
        acc -= te;
    }
    p.scaled_add(2.0 * c, &acc);
}

/// BSUM solver for agent `i`; its step size only depends on static data.
pub fn pdc_local_solver(problem: &CoupledProblem, i: usize, degree: usize, cfg: &SolverConfig) -> Result<BsumSolver> {
    let l = problem.l();
    let zeros_l = Array1::zeros(l);
    let zeros_p = Array1::zeros(problem.agents[i].p());
    let term = consensus_term(problem, i, degree, cfg.c, &zeros_l, zeros_l.view());
    let sp = QuadSubproblem { consensus: term, tau: cfg.tau_for(i), z_prev: zeros_p.view() };
    BsumSolver::new(&sp, cfg.beta_factor, cfg.eps_inner, cfg.inner_cap)
}

/// Local PDC-ADMM update of agent `i`: `(x, r)`, then `y`, then `z`.
/// `neighbor_term` is `sum_j (y_i + y_j)` at the previous iteration.
#[allow(clippy::too_many_arguments)]
pub fn pdc_agent_step(
    problem: &CoupledProblem,
    i: usize,
    degree: usize,
    state: &AgentState,
    neighbor_term: ArrayView1<f64>,
    cfg: &SolverConfig,
    solver: &BsumSolver,
    record_objective: bool,
) -> Result<AgentStep> {
    let agent = &problem.agents[i];
    let tau = cfg.tau_for(i);
    let term = consensus_term(problem, i, degree, cfg.c, &state.p, neighbor_term);
    let sp = QuadSubproblem { consensus: term, tau, z_prev: state.z.view() };

    let start = Instant::now();
    let out = solver.solve(&sp, state.x.view(), state.r.view(), record_objective)?;
    let inner_time = start.elapsed().as_secs_f64();
    if out.report.hit_cap {
        log::debug!("agent {i}: BSUM hit its cap (residual {:e})", out.report.residual);
    }

    let y = y_update(&term, out.x.view());
    let mut z = state.z.clone();
    let res = agent.c.dot(&out.x) + &out.r - &agent.d;
    z.scaled_add(1.0 / tau, &res);
    Ok(AgentStep {
        state: AgentState { x: out.x, r: out.r, y, z, p: state.p.clone() },
        report: out.report,
        inner_time,
        bsum_objective: out.objective_trace,
    })
}

/// Runs PDC-ADMM from the zero state.
pub fn pdc_run(
    problem: &CoupledProblem,
    graph: &Graph,
    cfg: &SolverConfig,
    obj_star: Option<f64>,
) -> Result<ConvergenceTrace> {
    engine::run(problem, graph, cfg, Algorithm::Pdc, None, obj_star)
}
