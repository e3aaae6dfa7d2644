//! Dual consensus ADMM with the polyhedra constraint kept inside each agent
//! subproblem. The `y` and `p` updates are the ones of [`crate::pdc_admm`];
//! only the local `x` problem differs, and there is no slack or polyhedra dual.

use std::time::Instant;

use ndarray::ArrayView1;

use crate::diagnostics::{Algorithm, ConvergenceTrace};
use crate::error::Result;
use crate::netgraph::Graph;
use crate::pdc_admm::{consensus_term, y_update, AgentState, AgentStep, SolverConfig};
use crate::problem::CoupledProblem;
use crate::subsolvers::{InnerAdmmSolver, InnerAdmmState};

/// Inner ADMM for agent `i` with penalty `cfg.c1` and tolerance `cfg.eps_inner`.
pub fn dc_local_solver(
    problem: &CoupledProblem,
    i: usize,
    degree: usize,
    cfg: &SolverConfig,
) -> Result<InnerAdmmSolver> {
    let zeros = ndarray::Array1::zeros(problem.l());
    let term = consensus_term(problem, i, degree, cfg.c, &zeros, zeros.view());
    InnerAdmmSolver::new(&term, cfg.c1, cfg.eps_inner, cfg.inner_cap)
}

/// Local DC-ADMM update of agent `i`: constrained `x`, then `y`. The
/// returned `r` is the slack `max(d - C x, 0)`, kept for reporting only.
#[allow(clippy::too_many_arguments)]
pub fn dc_agent_step(
    problem: &CoupledProblem,
    i: usize,
    degree: usize,
    state: &AgentState,
    neighbor_term: ArrayView1<f64>,
    cfg: &SolverConfig,
    solver: &InnerAdmmSolver,
    inner: &mut InnerAdmmState,
) -> Result<AgentStep> {
    let agent = &problem.agents[i];
    let term = consensus_term(problem, i, degree, cfg.c, &state.p, neighbor_term);

    let start = Instant::now();
    let (x, report) = solver.solve(&term, state.x.view(), inner)?;
    let inner_time = start.elapsed().as_secs_f64();
    if report.hit_cap {
        log::debug!("agent {i}: inner ADMM hit its cap (residual {:e})", report.residual);
    }

    let y = y_update(&term, x.view());
    let r = (&agent.d - &agent.c.dot(&x)).mapv(|v| v.max(0.0));
    Ok(AgentStep {
        state: AgentState { x, r, y, z: state.z.clone(), p: state.p.clone() },
        report,
        inner_time,
        bsum_objective: Vec::new(),
    })
}

/// Runs DC-ADMM from the zero state.
pub fn dc_run(
    problem: &CoupledProblem,
    graph: &Graph,
    cfg: &SolverConfig,
    obj_star: Option<f64>,
) -> Result<ConvergenceTrace> {
    crate::pdc_admm::engine::run(problem, graph, cfg, Algorithm::Dc, None, obj_star)
}
