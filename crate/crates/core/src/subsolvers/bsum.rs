//! Block successive upper-bound minimization for the PDC-ADMM agent
//! subproblem
//!
//! ```text
//! min_{x in S, r >= 0}  f(x) + h(x) + 1/(2 tau) ||C x + r - d + tau z||^2
//! ```
//!
//! Each sweep takes one proximal-gradient step in `x` (the smooth part is
//! majorized by its linearization plus `beta/2 ||x - x_hat||^2`) followed by
//! the exact `r` minimizer `max(d - C x - tau z, 0)`.

use ndarray::{Array1, Array2, ArrayView1};

use super::{lambda_max, ConsensusTerm, InnerReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadSubproblem<'a> {
    pub consensus: ConsensusTerm<'a>,
    pub tau: f64,
    /// Previous polyhedra dual `z_i`.
    pub z_prev: ArrayView1<'a, f64>,
}

impl QuadSubproblem<'_> {
    /// Hessian of the smooth part in `x`: `E^T E / (2 c |N_i|) + C^T C / tau`.
    pub fn curvature(&self) -> Array2<f64> {
        let a = self.consensus.agent;
        let mut h = a.e.t().dot(&a.e) * self.consensus.hessian_scale();
        if a.p() > 0 {
            h.scaled_add(1.0 / self.tau, &a.c.t().dot(&a.c));
        }
        h
    }

    /// `d - tau z`.
    fn shifted_rhs(&self) -> Array1<f64> {
        let a = self.consensus.agent;
        let mut h = a.d.clone();
        h.scaled_add(-self.tau, &self.z_prev);
        h
    }

    /// Full subproblem objective at `(x, r)`.
    pub fn objective(&self, x: ArrayView1<f64>, r: ArrayView1<f64>) -> f64 {
        let a = self.consensus.agent;
        let w0 = self.consensus.offset();
        let mut pen = a.c.dot(&x) + r - self.shifted_rhs();
        pen.mapv_inplace(|v| v * v);
        a.cost.value(x) + self.consensus.value(x, &w0) + pen.sum() / (2.0 * self.tau)
    }

    fn check(&self, x0: ArrayView1<f64>, r0: ArrayView1<f64>) -> Result<()> {
        let a = self.consensus.agent;
        if !(self.tau > 0.0 && self.consensus.c > 0.0) {
            return Err(Error::InvalidArgument("c and tau must be positive".into()));
        }
        if self.consensus.degree == 0 {
            return Err(Error::InvalidArgument("agent has no neighbors".into()));
        }
        if x0.len() != a.k() || r0.len() != a.p() || self.z_prev.len() != a.p() {
            return Err(Error::Dimension("BSUM warm start or z has the wrong length".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BsumOutput {
    pub x: Array1<f64>,
    pub r: Array1<f64>,
    pub report: InnerReport,
    /// Subproblem objective at the warm start and after every sweep; empty
    /// unless requested.
    pub objective_trace: Vec<f64>,
}

/// BSUM configured for one agent. `beta` only depends on the agent data and
/// the penalties, so it is computed once and reused across outer iterations.
#[derive(Debug, Clone, Copy)]
pub struct BsumSolver {
    beta: f64,
    eps2: f64,
    max_inner: usize,
}

impl BsumSolver {
    /// `beta = beta_factor * lambda_max(curvature)`.
    pub fn new(sp: &QuadSubproblem, beta_factor: f64, eps2: f64, max_inner: usize) -> Result<Self> {
        if !(beta_factor > 0.0) {
            return Err(Error::InvalidArgument(format!("beta_factor must be > 0, got {beta_factor}")));
        }
        let lmax = lambda_max(&sp.curvature())?;
        Self::with_beta(beta_factor * lmax, eps2, max_inner)
    }

    pub fn with_beta(beta: f64, eps2: f64, max_inner: usize) -> Result<Self> {
        if !(eps2 > 0.0) {
            return Err(Error::InvalidArgument(format!("eps2 must be > 0, got {eps2}")));
        }
        if max_inner == 0 {
            return Err(Error::InvalidArgument("inner iteration cap must be >= 1".into()));
        }
        // a vanishing curvature leaves the smooth part constant; any positive step works
        let beta = if beta > 0.0 { beta } else { 1.0 };
        Ok(Self { beta, eps2, max_inner })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn solve(
        &self,
        sp: &QuadSubproblem,
        x0: ArrayView1<f64>,
        r0: ArrayView1<f64>,
        record_objective: bool,
    ) -> Result<BsumOutput> {
        sp.check(x0, r0)?;
        let a = sp.consensus.agent;
        let w0 = sp.consensus.offset();
        let rhs = sp.shifted_rhs();
        let inv_tau = 1.0 / sp.tau;
        let norm = (a.k() + a.p()) as f64;

        let mut x = x0.to_owned();
        let mut r = r0.to_owned();
        let mut cx = a.c.dot(&x);
        let mut trace = Vec::new();
        if record_objective {
            trace.push(sp.objective(x.view(), r.view()));
        }

        let mut residual = f64::INFINITY;
        for sweep in 1..=self.max_inner {
            let mut grad = sp.consensus.gradient(x.view(), &w0);
            if a.p() > 0 {
                let pen = &cx + &r - &rhs;
                grad.scaled_add(inv_tau, &a.c.t().dot(&pen));
            }
            let mut step = x.clone();
            step.scaled_add(-1.0 / self.beta, &grad);
            let x_new = a.prox_in_set(step.view(), self.beta);

            let cx_new = a.c.dot(&x_new);
            let r_new = (&rhs - &cx_new).mapv(|v| v.max(0.0));

            let dx = &x_new - &x;
            let dr = &r_new - &r;
            residual = (dx.dot(&dx) + dr.dot(&dr)).sqrt() / norm;
            x = x_new;
            r = r_new;
            cx = cx_new;
            if record_objective {
                trace.push(sp.objective(x.view(), r.view()));
            }
            if residual <= self.eps2 {
                return Ok(BsumOutput {
                    x,
                    r,
                    report: InnerReport { iterations: sweep, residual, hit_cap: false },
                    objective_trace: trace,
                });
            }
        }
        Ok(BsumOutput {
            x,
            r,
            report: InnerReport { iterations: self.max_inner, residual, hit_cap: true },
            objective_trace: trace,
        })
    }
}

/// One-shot BSUM solve; computes `beta` from the subproblem data.
pub fn bsum_solve(
    sp: &QuadSubproblem,
    x0: ArrayView1<f64>,
    r0: ArrayView1<f64>,
    eps2: f64,
    max_inner: usize,
    beta_factor: f64,
) -> Result<BsumOutput> {
    BsumSolver::new(sp, beta_factor, eps2, max_inner)?.solve(sp, x0, r0, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{AgentData, CostFn, SimpleSet};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_agent(rng: &mut ChaCha8Rng, l: usize, k: usize, p: usize, cost: CostFn) -> AgentData {
        AgentData {
            e: Array2::from_shape_simple_fn((l, k), || StandardNormal.sample(rng)),
            c: Array2::from_shape_simple_fn((p, k), || StandardNormal.sample(rng)),
            d: Array1::from_shape_simple_fn(p, || StandardNormal.sample(rng)),
            cost,
            set: SimpleSet::FullSpace,
        }
    }

    struct Owned {
        q: Array1<f64>,
        p: Array1<f64>,
        s: Array1<f64>,
        z: Array1<f64>,
    }

    fn owned(rng: &mut ChaCha8Rng, l: usize, p: usize) -> Owned {
        let mut g = || -> f64 { StandardNormal.sample(rng) };
        Owned {
            q: Array1::from_shape_fn(l, |_| g()),
            p: Array1::from_shape_fn(l, |_| g()),
            s: Array1::from_shape_fn(l, |_| g()),
            z: Array1::from_shape_fn(p, |_| g()),
        }
    }

    fn subproblem<'a>(a: &'a AgentData, o: &'a Owned, c: f64, tau: f64, degree: usize, n: usize) -> QuadSubproblem<'a> {
        QuadSubproblem {
            consensus: ConsensusTerm {
                agent: a,
                c,
                degree,
                n_agents: n,
                q: o.q.view(),
                p_prev: o.p.view(),
                neighbor_term: o.s.view(),
            },
            tau,
            z_prev: o.z.view(),
        }
    }

    // With no polyhedra rows and a zero cost the subproblem is plain least
    // squares in x; compare with the normal equations solved directly.
    #[test]
    fn unconstrained_case_matches_normal_equations() {
        let a = AgentData {
            e: array![[2.0, 0.5, 0.0], [0.3, 1.5, -0.4], [0.0, 0.2, 1.0]],
            c: Array2::zeros((0, 3)),
            d: Array1::zeros(0),
            cost: CostFn::Zero,
            set: SimpleSet::FullSpace,
        };
        let o = Owned {
            q: array![1.0, -2.0, 0.5],
            p: array![0.1, 0.2, -0.3],
            s: array![0.4, -0.1, 0.2],
            z: Array1::zeros(0),
        };
        let (c, n) = (0.5, 4);
        let sp = subproblem(&a, &o, c, 0.5, 2, n);
        let out = bsum_solve(&sp, Array1::zeros(3).view(), Array1::zeros(0).view(), 1e-13, 100_000, 1.01).unwrap();
        assert!(!out.report.hit_cap);
        // minimizer of ||E x / c + w0||: E x = -c w0, with w0 = s - q/(n c) - p/c
        let w0: Array1<f64> = &o.s - &(&o.q / (n as f64 * c)) - &(&o.p / c);
        let rhs = -c * &w0;
        let nm = nalgebra::DMatrix::from_fn(3, 3, |i, j| a.e[[i, j]]);
        let sol = nm.lu().solve(&nalgebra::DVector::from_vec(rhs.to_vec())).unwrap();
        for j in 0..3 {
            assert!((out.x[j] - sol[j]).abs() < 1e-8, "{} vs {}", out.x[j], sol[j]);
        }
    }

    #[test]
    fn warm_start_at_optimum_stops_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_agent(&mut rng, 4, 5, 3, CostFn::L1 { lambda: 0.5 });
        let o = owned(&mut rng, 4, 3);
        let sp = subproblem(&a, &o, 0.3, 0.3, 2, 5);
        let solver = BsumSolver::new(&sp, 1.01, 1e-14, 200_000).unwrap();
        let first = solver.solve(&sp, Array1::zeros(5).view(), Array1::zeros(3).view(), false).unwrap();
        let loose = BsumSolver::new(&sp, 1.01, 1e-6, 10).unwrap();
        let again = loose.solve(&sp, first.x.view(), first.r.view(), false).unwrap();
        assert!(again.report.iterations <= 2);
        assert!(again.report.residual <= 1e-6);
    }

    #[test]
    fn beta_follows_curvature_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_agent(&mut rng, 3, 4, 2, CostFn::Zero);
        let o = owned(&mut rng, 3, 2);
        // with c = 1 the consensus curvature reads c/(2|N_i|) E^T E
        let (c, tau, degree) = (1.0, 0.7, 3);
        let sp = subproblem(&a, &o, c, tau, degree, 4);
        let m = a.e.t().dot(&a.e) * (c / (2.0 * degree as f64)) + a.c.t().dot(&a.c) / tau;
        let expect = 0.4 * lambda_max(&m).unwrap();
        let got = BsumSolver::new(&sp, 0.4, 1e-6, 10).unwrap().beta();
        assert!((got - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn rejects_invalid_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_agent(&mut rng, 2, 2, 1, CostFn::Zero);
        let o = owned(&mut rng, 2, 1);
        let sp = subproblem(&a, &o, 1.0, 1.0, 1, 2);
        assert!(BsumSolver::new(&sp, 0.0, 1e-6, 10).is_err());
        assert!(BsumSolver::new(&sp, 1.0, 0.0, 10).is_err());
        let bad = subproblem(&a, &o, 1.0, 0.0, 1, 2);
        assert!(bsum_solve(&bad, Array1::zeros(2).view(), Array1::zeros(1).view(), 1e-6, 10, 1.0).is_err());
        assert!(bsum_solve(&sp, Array1::zeros(3).view(), Array1::zeros(1).view(), 1e-6, 10, 1.0).is_err());
    }

    #[test]
    fn cap_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_agent(&mut rng, 3, 4, 3, CostFn::L1 { lambda: 0.1 });
        let o = owned(&mut rng, 3, 3);
        let sp = subproblem(&a, &o, 0.2, 0.2, 1, 3);
        let out = bsum_solve(&sp, Array1::zeros(4).view(), Array1::zeros(3).view(), 1e-15, 3, 1.01).unwrap();
        assert!(out.report.hit_cap);
        assert_eq!(out.report.iterations, 3);
    }

    #[test]
    fn majorization_gives_monotone_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let costs = [CostFn::L1 { lambda: 0.8 }, CostFn::SquaredL2, CostFn::L2Norm, CostFn::Zero];
        for trial in 0..12 {
            let cost = costs[trial % costs.len()];
            let mut a = random_agent(&mut rng, 4, 6, 5, cost);
            if trial % 3 == 1 && cost.is_separable() {
                a.set = SimpleSet::Box { lo: vec![-0.5; 6], hi: vec![0.5; 6] };
            }
            let o = owned(&mut rng, 4, 5);
            let c = rng.random_range(0.01..2.0);
            let tau = rng.random_range(0.01..2.0);
            let sp = subproblem(&a, &o, c, tau, 1 + trial % 3, 6);
            let solver = BsumSolver::new(&sp, 1.01, 1e-12, 300).unwrap();
            let out = solver.solve(&sp, Array1::zeros(6).view(), Array1::zeros(5).view(), true).unwrap();
            for w in out.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
            }
            assert!(out.r.iter().all(|&v| v >= 0.0));
            assert!(a.set.contains(out.x.view()));
        }
    }
}
