//! Per-iteration agent subproblem solvers.
//!
//! Both outer methods minimize, for one agent, the consensus penalty
//!
//! ```text
//! h(x) = c/(4|N_i|) * || (E_i x - q/N)/c - p_i/c + s_i ||^2
//! ```
//!
//! where `s_i` aggregates the neighbors' previous duals. PDC-ADMM adds the
//! soft polyhedra term `1/(2 tau) ||C_i x + r - d_i + tau z_i||^2` over
//! `r >= 0` (solved by [`bsum`]); DC-ADMM keeps `C_i x <= d_i` as a hard
//! constraint (solved by [`inner_admm`]).

pub mod bsum;
pub mod inner_admm;
mod power;

pub use bsum::{bsum_solve, BsumOutput, BsumSolver, QuadSubproblem};
pub use inner_admm::{inner_admm_solve, InnerAdmmSolver, InnerAdmmState};
pub use power::{lambda_max, POWER_MAX_ITERS};

use ndarray::{Array1, ArrayView1};

use crate::problem::AgentData;

/// Iteration cap shared by the inner solvers.
pub const DEFAULT_INNER_CAP: usize = 5000;

/// Outcome of an inner solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InnerReport {
    pub iterations: usize,
    /// Final value of the stopping quantity.
    pub residual: f64,
    pub hit_cap: bool,
}

/// `sign(v) * max(|v| - t, 0)`, element-wise.
pub fn soft_threshold(v: ArrayView1<f64>, t: f64) -> Array1<f64> {
    debug_assert!(t >= 0.0);
    v.mapv(|e| e.signum() * (e.abs() - t).max(0.0))
}

/// The consensus penalty `h` shared by both subproblem kinds.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusTerm<'a> {
    pub agent: &'a AgentData,
    pub c: f64,
    pub degree: usize,
    /// Total number of agents in the problem.
    pub n_agents: usize,
    pub q: ArrayView1<'a, f64>,
    pub p_prev: ArrayView1<'a, f64>,
    /// `sum_j (y_i + y_j)`, or `2 sum_j t_ij` in the randomized method.
    pub neighbor_term: ArrayView1<'a, f64>,
}

impl ConsensusTerm<'_> {
    /// Constant part `w0` so that the penalty reads `c/(4|N_i|) ||E x / c + w0||^2`.
    pub fn offset(&self) -> Array1<f64> {
        let n = self.n_agents as f64;
        let c = self.c;
        let mut w0 = self.neighbor_term.to_owned();
        w0.zip_mut_with(&self.q, |w, &qv| *w -= qv / (n * c));
        w0.zip_mut_with(&self.p_prev, |w, &pv| *w -= pv / c);
        w0
    }

    pub fn weight(&self) -> f64 {
        self.c / (4.0 * self.degree as f64)
    }

    /// Curvature of `h` along `x`: `E^T E / (2 c |N_i|)`.
    pub fn hessian_scale(&self) -> f64 {
        1.0 / (2.0 * self.c * self.degree as f64)
    }

    pub fn value(&self, x: ArrayView1<f64>, w0: &Array1<f64>) -> f64 {
        let w = self.agent.e.dot(&x) / self.c + w0;
        self.weight() * w.dot(&w)
    }

    /// Gradient of `h` at `x`.
    pub fn gradient(&self, x: ArrayView1<f64>, w0: &Array1<f64>) -> Array1<f64> {
        let w = self.agent.e.dot(&x) / self.c + w0;
        self.agent.e.t().dot(&w) / (2.0 * self.degree as f64)
    }
}
