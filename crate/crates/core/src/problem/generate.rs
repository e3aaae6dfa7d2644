//! Seeded random instance generators.
//!
//! Data entries are i.i.d. standard normal. Polyhedra right-hand sides are
//! built as `d_i = C_i x_feas + |xi|` so every instance has a strictly
//! feasible point, which is returned alongside the problem.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AgentData, CostFn, CoupledProblem, PrimalPoint, SimpleSet};
use crate::error::{Error, Result};

/// Fraction of nonzero entries in the LASSO ground-truth vector.
pub const LASSO_SUPPORT: f64 = 0.1;
/// Standard deviation of the additive noise on `b`.
pub const LASSO_NOISE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub problem: CoupledProblem,
    /// Strictly feasible point; the slack agent's block makes the coupling
    /// constraint hold exactly.
    pub feasible: PrimalPoint,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || normal(rng))
}

fn slack_agent(l: usize) -> AgentData {
    AgentData {
        e: -Array2::eye(l),
        c: Array2::zeros((0, l)),
        d: Array1::zeros(0),
        cost: CostFn::SquaredL2,
        set: SimpleSet::FullSpace,
    }
}

fn check_dims(dims: &[(&str, usize)]) -> Result<()> {
    match dims.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(Error::InvalidArgument(format!("{name} must be >= 1"))),
        None => Ok(()),
    }
}

/// Finishes an instance whose agents `1..` are given: prepends the slack
/// agent `x_0 = sum_i E_i x_i - q` and assembles the feasible point.
fn with_slack(q: Array1<f64>, agents: Vec<AgentData>, x_feas: Vec<Array1<f64>>) -> Result<GeneratedProblem> {
    let l = q.len();
    let mut x0 = -&q;
    for (a, x) in agents.iter().zip(&x_feas) {
        x0 += &a.e.dot(x);
    }
    let mut all = Vec::with_capacity(agents.len() + 1);
    all.push(slack_agent(l));
    all.extend(agents);
    let mut x = Vec::with_capacity(all.len());
    x.push(x0);
    x.extend(x_feas);
    let problem = CoupledProblem::new(q, all)?;
    let feasible = PrimalPoint::from_x(&problem, x);
    Ok(GeneratedProblem { problem, feasible })
}

/// Column-partitioned constrained LASSO
/// `min ||sum_i A_i x_i - b||^2 + lambda sum_i ||x_i||_1  s.t. C_i x_i <= d_i`,
/// recast with a slack agent 0 holding `x_0 = sum_i A_i x_i - b`.
/// The result has `n_agents + 1` agents.
pub fn make_constrained_lasso(
    n_agents: usize,
    k: usize,
    l: usize,
    p: usize,
    lambda: f64,
    seed: u64,
) -> Result<GeneratedProblem> {
    check_dims(&[("n_agents", n_agents), ("K", k), ("L", l), ("P", p)])?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Vec::with_capacity(n_agents);
    let mut x_true = Vec::with_capacity(n_agents);
    let mut b = Array1::<f64>::zeros(l);
    for _ in 0..n_agents {
        let a = gaussian_matrix(&mut rng, l, k);
        let x: Array1<f64> = (0..k)
            .map(|_| {
                let on = rng.random::<f64>() < LASSO_SUPPORT;
                let v = normal(&mut rng);
                if on {
                    v
                } else {
                    0.0
                }
            })
            .collect();
        let c = gaussian_matrix(&mut rng, p, k);
        let slack: Array1<f64> = (0..p).map(|_| normal(&mut rng).abs()).collect();
        let d = c.dot(&x) + slack;
        b += &a.dot(&x);
        agents.push(AgentData { e: a, c, d, cost: CostFn::L1 { lambda }, set: SimpleSet::FullSpace });
        x_true.push(x);
    }
    for v in b.iter_mut() {
        *v += LASSO_NOISE * normal(&mut rng);
    }
    with_slack(b, agents, x_true)
}

/// Load-control instance: agent 0 carries the squared imbalance
/// `||x_0||^2` with `x_0 = sum_i E_i x_i - q`, load agents have zero cost and
/// box-like polyhedra (rows are `+e_j` / `-e_j`). The supply `q` equals the
/// consumption at the feasible point, so objective 0 is attainable.
pub fn make_load_control(n_agents: usize, k: usize, l: usize, p: usize, seed: u64) -> Result<GeneratedProblem> {
    check_dims(&[("n_agents", n_agents), ("K", k), ("L", l), ("P", p)])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = Vec::with_capacity(n_agents);
    let mut x_feas = Vec::with_capacity(n_agents);
    let mut q = Array1::<f64>::zeros(l);
    for _ in 0..n_agents {
        let e = gaussian_matrix(&mut rng, l, k).mapv(f64::abs);
        let x: Array1<f64> = (0..k).map(|_| normal(&mut rng)).collect();
        let c = Array2::from_shape_fn((p, k), |(row, col)| {
            let sign = if (row / k).is_multiple_of(2) { 1.0 } else { -1.0 };
            if row % k == col {
                sign
            } else {
                0.0
            }
        });
        let slack: Array1<f64> = (0..p).map(|_| normal(&mut rng).abs()).collect();
        let d = c.dot(&x) + slack;
        q += &e.dot(&x);
        agents.push(AgentData { e, c, d, cost: CostFn::Zero, set: SimpleSet::FullSpace });
        x_feas.push(x);
    }
    with_slack(q, agents, x_feas)
}
