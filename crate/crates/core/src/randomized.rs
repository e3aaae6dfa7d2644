//! Randomized PDC-ADMM: in each iteration only a random subset of agents
//! is ON and only a random subset of links between ON agents works.
//!
//! Active agents run the usual local update against the stored edge
//! midpoints `t_ij`; working links refresh `t_ij`; idle agents keep all of
//! their state. With every agent ON and no link failure this is exactly the
//! deterministic method.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Algorithm, ConvergenceTrace, InnerStats};
use crate::error::{Error, Result};
use crate::netgraph::Graph;
use crate::pdc_admm::{OuterSolver, SolverConfig};
use crate::problem::CoupledProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModel {
    /// ON probability per agent.
    pub alpha: Vec<f64>,
    /// Per-iteration link failure probability.
    pub p_e: f64,
}

impl ActivityModel {
    pub fn uniform(n: usize, alpha: f64, p_e: f64) -> Self {
        Self { alpha: vec![alpha; n], p_e }
    }

    pub fn validate(&self, graph: &Graph) -> Result<()> {
        if self.alpha.len() != graph.n() {
            return Err(Error::Dimension(format!("{} ON probabilities for {} agents", self.alpha.len(), graph.n())));
        }
        if let Some(a) = self.alpha.iter().find(|&&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::InvalidArgument(format!("ON probability must be in (0, 1], got {a}")));
        }
        if !(0.0..=1.0).contains(&self.p_e) {
            return Err(Error::InvalidArgument(format!(
                "link failure probability must be in [0, 1], got {}",
                self.p_e
            )));
        }
        Ok(())
    }

    /// Probability that edge `(i, j)` is used in a given iteration.
    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.alpha[i] * self.alpha[j] * (1.0 - self.p_e)
    }

    /// Every agent always ON and no link ever fails.
    pub fn is_full(&self) -> bool {
        self.p_e == 0.0 && self.alpha.iter().all(|&a| a == 1.0)
    }
}

/// Active agents and active edges of one iteration, as masks over agent and
/// edge ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivitySample {
    pub omega: Vec<bool>,
    pub psi: Vec<bool>,
}

impl ActivitySample {
    pub fn full(graph: &Graph) -> Self {
        Self { omega: vec![true; graph.n()], psi: vec![true; graph.num_edges()] }
    }

    pub fn idle(graph: &Graph) -> Self {
        Self { omega: vec![false; graph.n()], psi: vec![false; graph.num_edges()] }
    }

    pub fn active_agents(&self) -> usize {
        self.omega.iter().filter(|&&b| b).count()
    }

    pub fn active_edges(&self) -> usize {
        self.psi.iter().filter(|&&b| b).count()
    }
}

/// Draws the activity of iteration `k`. The stream depends only on
/// `(seed, k)`: agents are drawn first, then one draw per edge whether or not
/// its endpoints are ON.
pub fn sample_activity(m: &ActivityModel, graph: &Graph, k: usize, seed: u64) -> ActivitySample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let omega: Vec<bool> = m.alpha.iter().map(|&a| rng.random::<f64>() < a).collect();
    let psi = graph
        .edges()
        .iter()
        .map(|&(i, j)| {
            let works = rng.random::<f64>() >= m.p_e;
            works && omega[i] && omega[j]
        })
        .collect();
    ActivitySample { omega, psi }
}

/// One randomized iteration on `solver` with the given activity.
pub fn rpdc_step(solver: &mut OuterSolver, sample: &ActivitySample) -> Result<InnerStats> {
    solver.step(sample)
}

/// Runs randomized PDC-ADMM from the zero state; `cfg.seed` drives the activity.
pub fn rpdc_run(
    problem: &CoupledProblem,
    graph: &Graph,
    cfg: &SolverConfig,
    activity: &ActivityModel,
    obj_star: Option<f64>,
) -> Result<ConvergenceTrace> {
    crate::pdc_admm::engine::run(problem, graph, cfg, Algorithm::Rpdc, Some(activity), obj_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_activity_samples_everything() {
        let g = Graph::random_connected(8, 0.5, 3).unwrap();
        let m = ActivityModel::uniform(8, 1.0, 0.0);
        assert!(m.is_full());
        for k in 1..50 {
            assert_eq!(sample_activity(&m, &g, k, 11), ActivitySample::full(&g));
        }
    }

    #[test]
    fn all_links_failing_gives_no_edges() {
        let g = Graph::complete(5).unwrap();
        let m = ActivityModel::uniform(5, 0.8, 1.0);
        for k in 1..50 {
            assert_eq!(sample_activity(&m, &g, k, 2).active_edges(), 0);
        }
    }

    #[test]
    fn sample_is_deterministic_and_consistent() {
        let g = Graph::random_connected(10, 0.4, 1).unwrap();
        let m = ActivityModel::uniform(10, 0.6, 0.3);
        for k in 1..30 {
            let a = sample_activity(&m, &g, k, 5);
            assert_eq!(a, sample_activity(&m, &g, k, 5));
            for (e, &(i, j)) in g.edges().iter().enumerate() {
                if a.psi[e] {
                    assert!(a.omega[i] && a.omega[j]);
                }
            }
        }
        assert_ne!(sample_activity(&m, &g, 1, 5), sample_activity(&m, &g, 2, 5));
    }

    // Binomial 3-sigma band around beta = 0.7 * 0.7 * 0.5.
    #[test]
    fn edge_frequency_matches_beta() {
        let g = Graph::path(2).unwrap();
        let m = ActivityModel::uniform(2, 0.7, 0.5);
        let beta = m.beta(0, 1);
        assert!((beta - 0.245).abs() < 1e-15);
        let n = 100_000;
        let hits = (1..=n).filter(|&k| sample_activity(&m, &g, k, 99).psi[0]).count();
        let freq = hits as f64 / n as f64;
        let sigma = (beta * (1.0 - beta) / n as f64).sqrt();
        assert!((freq - beta).abs() <= 3.0 * sigma, "{freq} vs {beta} (sigma {sigma})");
    }

    fn small() -> (CoupledProblem, Graph) {
        let gen = crate::problem::make_constrained_lasso(3, 5, 2, 3, 0.5, 6).unwrap();
        (gen.problem, Graph::complete(4).unwrap())
    }

    fn warm_up(s: &mut OuterSolver, g: &Graph) {
        for _ in 0..5 {
            s.step(&ActivitySample::full(g)).unwrap();
        }
    }

    #[test]
    fn idle_iteration_changes_nothing() {
        let (p, g) = small();
        let cfg = SolverConfig::default();
        let mut s = OuterSolver::new(&p, &g, &cfg, crate::pdc_admm::SubproblemKind::Proximal).unwrap();
        warm_up(&mut s, &g);
        let before = s.state().clone();
        rpdc_step(&mut s, &ActivitySample::idle(&g)).unwrap();
        assert_eq!(s.state(), &before);
    }

    #[test]
    fn isolated_active_agent_keeps_p_and_edges() {
        let (p, g) = small();
        let cfg = SolverConfig::default();
        let mut s = OuterSolver::new(&p, &g, &cfg, crate::pdc_admm::SubproblemKind::Proximal).unwrap();
        warm_up(&mut s, &g);
        let before = s.state().clone();
        let mut sample = ActivitySample::idle(&g);
        sample.omega[1] = true;
        rpdc_step(&mut s, &sample).unwrap();
        let after = s.state();
        assert_eq!(after.t, before.t);
        assert_eq!(after.agents[1].p, before.agents[1].p);
        assert_ne!(after.agents[1].y, before.agents[1].y);
        for i in [0, 2, 3] {
            assert_eq!(after.agents[i], before.agents[i]);
        }
    }

    #[test]
    fn full_activity_reproduces_deterministic_trace() {
        let (p, g) = small();
        let cfg =
            SolverConfig { max_outer: 30, stop_rule: crate::pdc_admm::StopRule::Never, seed: 4, ..Default::default() };
        let det = crate::pdc_admm::pdc_run(&p, &g, &cfg, None).unwrap();
        let rnd = rpdc_run(&p, &g, &cfg, &ActivityModel::uniform(4, 1.0, 0.0), None).unwrap();
        assert_eq!(det.last, rnd.last);
        assert_eq!(det.last_y, rnd.last_y);
        for (a, b) in det.rows.iter().zip(&rnd.rows) {
            assert_eq!((a.objective, a.feas, a.consensus_residual), (b.objective, b.feas, b.consensus_residual));
        }
    }

    #[test]
    fn converges_in_mean_over_seeds() {
        let (p, g) = small();
        let star = crate::oracle::reference_solve(&p, 1e-10).unwrap().obj_star;
        let m = ActivityModel::uniform(4, 0.7, 0.5);
        let mut total = 0.0;
        for seed in 0..20 {
            let cfg = SolverConfig { max_outer: 3000, stop_tol: 1e-5, seed, ..Default::default() };
            let t = rpdc_run(&p, &g, &cfg, &m, Some(star)).unwrap();
            total += t.final_row().unwrap().stop_metric();
        }
        let mean = total / 20.0;
        assert!(mean <= 1e-3, "mean terminal acc + feas {mean}");
    }

    #[test]
    fn model_validation() {
        let g = Graph::path(3).unwrap();
        assert!(ActivityModel::uniform(3, 0.5, 0.5).validate(&g).is_ok());
        assert!(ActivityModel::uniform(3, 0.0, 0.5).validate(&g).is_err());
        assert!(ActivityModel::uniform(3, 0.5, 1.5).validate(&g).is_err());
        assert!(ActivityModel::uniform(2, 0.5, 0.5).validate(&g).is_err());
    }
}
