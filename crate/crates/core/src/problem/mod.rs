//! Problem data for
//!
//! ```text
//! minimize   sum_i f_i(x_i)
//! subject to sum_i E_i x_i = q
//!            C_i x_i <= d_i,  x_i in S_i,   i = 1..N
//! ```
//!
//! together with the objective and feasibility metrics every solver reports.

mod cost;
mod generate;
mod json;

pub use cost::{CostFn, SimpleSet};
pub use generate::{make_constrained_lasso, make_load_control, GeneratedProblem};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Data owned by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    /// Coupling block, `L x K_i`.
    pub e: Array2<f64>,
    /// Polyhedra block, `P_i x K_i`; zero rows means no local inequality.
    pub c: Array2<f64>,
    pub d: Array1<f64>,
    pub cost: CostFn,
    pub set: SimpleSet,
}

impl AgentData {
    pub fn k(&self) -> usize {
        self.e.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    /// `argmin_{x in S} f(x) + (beta/2)||x - v||^2`.
    pub fn prox_in_set(&self, v: ArrayView1<f64>, beta: f64) -> Array1<f64> {
        self.prox_in_set_steps(v, Array1::from_elem(v.len(), 1.0 / beta).view())
    }

    /// `argmin_{x in S} f(x) + sum_j (x_j - v_j)^2 / (2 steps_j)`. The
    /// non-separable `L2Norm` cost needs uniform steps.
    pub fn prox_in_set_steps(&self, v: ArrayView1<f64>, steps: ArrayView1<f64>) -> Array1<f64> {
        if self.cost.is_separable() {
            // coordinate-wise problems: clamping the unconstrained prox is exact
            let mut x = self.cost.prox_steps(v, steps);
            self.set.project_in_place(&mut x);
            x
        } else {
            // the orthant is a cone that the radial shrink respects after projecting
            let v = self.set.project(v);
            self.cost.prox_steps(v.view(), steps)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledProblem {
    pub q: Array1<f64>,
    pub agents: Vec<AgentData>,
}

/// Primal iterate: local variables `x_i` and slacks `r_i` of `C_i x_i + r_i = d_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub x: Vec<Array1<f64>>,
    pub r: Vec<Array1<f64>>,
}

impl PrimalPoint {
    pub fn zeros(p: &CoupledProblem) -> Self {
        Self {
            x: p.agents.iter().map(|a| Array1::zeros(a.k())).collect(),
            r: p.agents.iter().map(|a| Array1::zeros(a.p())).collect(),
        }
    }

    /// Point with the given `x` and slacks `max(d - C x, 0)`.
    pub fn from_x(p: &CoupledProblem, x: Vec<Array1<f64>>) -> Self {
        let r = p.agents.iter().zip(&x).map(|(a, xi)| (&a.d - &a.c.dot(xi)).mapv(|v| v.max(0.0))).collect();
        Self { x, r }
    }
}

impl CoupledProblem {
    pub fn new(q: Array1<f64>, agents: Vec<AgentData>) -> Result<Self> {
        let p = Self { q, agents };
        p.validate()?;
        Ok(p)
    }

    pub fn l(&self) -> usize {
        self.q.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn total_k(&self) -> usize {
        self.agents.iter().map(AgentData::k).sum()
    }

    pub fn total_p(&self) -> usize {
        self.agents.iter().map(AgentData::p).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::InvalidArgument("problem needs at least one agent".into()));
        }
        if self.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("q"));
        }
        let l = self.l();
        for (i, a) in self.agents.iter().enumerate() {
            if a.e.nrows() != l {
                return Err(Error::Dimension(format!("agent {i}: E has {} rows, expected {l}", a.e.nrows())));
            }
            if a.c.ncols() != a.k() {
                return Err(Error::Dimension(format!("agent {i}: C has {} columns, expected {}", a.c.ncols(), a.k())));
            }
            if a.d.len() != a.p() {
                return Err(Error::Dimension(format!("agent {i}: d has length {}, expected {}", a.d.len(), a.p())));
            }
            if a.e.iter().chain(a.c.iter()).chain(a.d.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("agent data"));
            }
            if let CostFn::L1 { lambda } = a.cost {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::InvalidArgument(format!("agent {i}: l1 weight must be >= 0")));
                }
            }
            if a.cost == CostFn::L2Norm && matches!(a.set, SimpleSet::Box { .. }) {
                return Err(Error::InvalidArgument(format!("agent {i}: the l2 cost cannot be combined with a box")));
            }
            if let SimpleSet::Box { lo, hi } = &a.set {
                if lo.len() != a.k() || hi.len() != a.k() {
                    return Err(Error::Dimension(format!("agent {i}: box bounds must have length {}", a.k())));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::InvalidArgument(format!("agent {i}: box has lo > hi")));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn check_point(&self, pt: &PrimalPoint) -> Result<()> {
        if pt.x.len() != self.n_agents() || pt.r.len() != self.n_agents() {
            return Err(Error::Dimension(format!(
                "point has {} / {} blocks, problem has {} agents",
                pt.x.len(),
                pt.r.len(),
                self.n_agents()
            )));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if pt.x[i].len() != a.k() || pt.r[i].len() != a.p() {
                return Err(Error::Dimension(format!("agent {i}: point block sizes do not match")));
            }
        }
        Ok(())
    }

    /// `F(x) = sum_i f_i(x_i)`.
    pub fn objective(&self, pt: &PrimalPoint) -> Result<f64> {
        self.check_point(pt)?;
        Ok(self.objective_x(&pt.x))
    }

    pub(crate) fn objective_x(&self, x: &[Array1<f64>]) -> f64 {
        self.agents.iter().zip(x).map(|(a, xi)| a.cost.value(xi.view())).sum()
    }

    /// `sum_i E_i x_i - q`.
    pub fn coupling_residual(&self, pt: &PrimalPoint) -> Result<Array1<f64>> {
        self.check_point(pt)?;
        Ok(self.coupling_residual_x(&pt.x))
    }

    pub(crate) fn coupling_residual_x(&self, x: &[Array1<f64>]) -> Array1<f64> {
        let mut acc = -&self.q;
        for (a, xi) in self.agents.iter().zip(x) {
            acc += &a.e.dot(xi);
        }
        acc
    }

    /// Mean positive part of `C_i x_i - d_i` over all polyhedra rows; 0 when
    /// the problem has no rows.
    pub fn feas_metric(&self, pt: &PrimalPoint) -> Result<f64> {
        self.check_point(pt)?;
        Ok(self.feas_x(&pt.x))
    }

    pub(crate) fn feas_x(&self, x: &[Array1<f64>]) -> f64 {
        let rows = self.total_p();
        if rows == 0 {
            return 0.0;
        }
        let total: f64 =
            self.agents.iter().zip(x).map(|(a, xi)| (a.c.dot(xi) - &a.d).iter().map(|v| v.max(0.0)).sum::<f64>()).sum();
        total / rows as f64
    }

    /// Largest single-row violation of `C_i x_i <= d_i`.
    pub fn max_violation(&self, x: &[Array1<f64>]) -> f64 {
        self.agents.iter().zip(x).flat_map(|(a, xi)| (a.c.dot(xi) - &a.d).to_vec()).fold(0.0, f64::max)
    }
}

/// Signed relative gap `(obj_k - obj_star) / obj_star`.
pub fn acc_metric(obj_k: f64, obj_star: f64) -> Result<f64> {
    if obj_star == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((obj_k - obj_star) / obj_star)
}
