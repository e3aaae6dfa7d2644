//! Centralized reference solver.
//!
//! Solves the saddle problem
//!
//! ```text
//! min_{x_i in S_i} max_{y, z >= 0}  sum_i f_i(x_i) + y^T (sum_i E_i x_i - q) + sum_i z_i^T (C_i x_i - d_i)
//! ```
//!
//! with a diagonally preconditioned primal-dual hybrid gradient method.
//! Iterates are restarted to the better of the current point and the epoch
//! average whenever the KKT residual has dropped enough, and the primal
//! weight is rebalanced at every restart. This converges linearly on the
//! piecewise linear-quadratic instances used here, so tight tolerances are
//! reachable.

use ndarray::{Array1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{CostFn, CoupledProblem, PrimalPoint};

pub const DEFAULT_ORACLE_TOL: f64 = 1e-9;
pub const ORACLE_MAX_ITERS: usize = 1_000_000;
/// Largest `sum_i (K_i + P_i)` accepted.
pub const ORACLE_MAX_DIM: usize = 100_000;

const CHECK_EVERY: usize = 64;
const STEP_SAFETY: f64 = 0.99;
const RESTART_SUFFICIENT: f64 = 0.2;
const RESTART_NECESSARY: f64 = 0.8;
const RESTART_ARTIFICIAL: f64 = 0.36;

/// A primal-dual point of the stacked problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: Vec<Array1<f64>>,
    /// Dual of the coupling constraint.
    pub y: Array1<f64>,
    /// Duals of the polyhedra rows, `z_i >= 0`.
    pub z: Vec<Array1<f64>>,
}

impl KktPoint {
    pub fn zeros(p: &CoupledProblem) -> Self {
        Self {
            x: p.agents.iter().map(|a| Array1::zeros(a.k())).collect(),
            y: Array1::zeros(p.l()),
            z: p.agents.iter().map(|a| Array1::zeros(a.p())).collect(),
        }
    }
}

/// Components of the KKT residual, each divided by the square root of its dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktTerms {
    pub stationarity: f64,
    pub coupling: f64,
    pub violation: f64,
    pub complementarity: f64,
}

impl KktTerms {
    pub fn total(&self) -> f64 {
        self.stationarity + self.coupling + self.violation + self.complementarity
    }
}

fn rms(sq_sum: f64, dim: usize) -> f64 {
    if dim == 0 {
        0.0
    } else {
        (sq_sum / dim as f64).sqrt()
    }
}

fn dist_to_interval(g: f64, (lo, hi): (f64, f64)) -> f64 {
    (lo - g).max(g - hi).max(0.0)
}

pub fn kkt_terms(p: &CoupledProblem, pt: &KktPoint) -> Result<KktTerms> {
    let n = p.n_agents();
    if pt.x.len() != n || pt.z.len() != n || pt.y.len() != p.l() {
        return Err(Error::Dimension("KKT point does not match the problem".into()));
    }
    let mut stat_sq = 0.0;
    let mut viol_sq = 0.0;
    let mut comp_sq = 0.0;
    for (i, (a, (x, z))) in p.agents.iter().zip(pt.x.iter().zip(&pt.z)).enumerate() {
        if x.len() != a.k() || z.len() != a.p() {
            return Err(Error::Dimension(format!("agent {i}: KKT block sizes do not match")));
        }
        // -(E^T y + C^T z) must lie in the subdifferential of f + indicator(S)
        let g = -(a.e.t().dot(&pt.y) + a.c.t().dot(z));
        let outside = x - &a.set.project(x.view());
        stat_sq += outside.dot(&outside);
        if a.cost.is_separable() {
            for (j, (&xj, &gj)) in x.iter().zip(&g).enumerate() {
                let (fl, fh) = a.cost.subdiff_interval(xj);
                let (nl, nh) = a.set.normal_interval(j, xj);
                let d = dist_to_interval(gj, (fl + nl, fh + nh));
                stat_sq += d * d;
            }
        } else if a.set.is_full() {
            let norm = x.dot(x).sqrt();
            let d = if norm > 0.0 {
                let r = &g - &(x / norm);
                r.dot(&r).sqrt()
            } else {
                (g.dot(&g).sqrt() - 1.0).max(0.0)
            };
            stat_sq += d * d;
        } else {
            // natural residual x - prox(x + g)
            let r = x - &a.prox_in_set((x + &g).view(), 1.0);
            stat_sq += r.dot(&r);
        }
        let slack = &a.d - &a.c.dot(x);
        for (&s, &zj) in slack.iter().zip(z) {
            viol_sq += (-s).max(0.0).powi(2);
            comp_sq += (zj * s).powi(2) + zj.min(0.0).powi(2);
        }
    }
    let coupling = p.coupling_residual_x(&pt.x);
    Ok(KktTerms {
        stationarity: rms(stat_sq, p.total_k()),
        coupling: rms(coupling.dot(&coupling), p.l()),
        violation: rms(viol_sq, p.total_p()),
        complementarity: rms(comp_sq, p.total_p()),
    })
}

/// Dimension-normalized KKT residual; zero exactly at a KKT point.
pub fn kkt_residual(p: &CoupledProblem, pt: &KktPoint) -> Result<f64> {
    kkt_terms(p, pt).map(|t| t.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_ORACLE_TOL, max_iters: ORACLE_MAX_ITERS }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub point: KktPoint,
    /// Slack `max(d - C x, 0)`.
    pub r: Vec<Array1<f64>>,
    pub obj_star: f64,
    pub kkt: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit above `tol`; the result must not
    /// be used as ground truth then.
    pub converged: bool,
    /// `max(||y||_2, ||z||_2)` of the returned duals.
    pub dual_norm: f64,
}

impl OracleSolution {
    pub fn primal(&self) -> PrimalPoint {
        PrimalPoint { x: self.point.x.clone(), r: self.r.clone() }
    }
}

struct Steps {
    /// Per-agent primal steps before the primal weight is applied.
    primal: Vec<Array1<f64>>,
    coupling: Array1<f64>,
    rows: Vec<Array1<f64>>,
}

fn inv_or_one(s: f64) -> f64 {
    if s > 0.0 {
        1.0 / s
    } else {
        1.0
    }
}

/// Pock-Chambolle diagonal steps from absolute row and column sums.
fn preconditioner(p: &CoupledProblem) -> Steps {
    let mut coupling_sums = Array1::<f64>::zeros(p.l());
    let mut primal = Vec::with_capacity(p.n_agents());
    let mut rows = Vec::with_capacity(p.n_agents());
    for a in &p.agents {
        let abs_e = a.e.mapv(f64::abs);
        let abs_c = a.c.mapv(f64::abs);
        coupling_sums += &abs_e.sum_axis(ndarray::Axis(1));
        let cols = abs_e.sum_axis(ndarray::Axis(0)) + abs_c.sum_axis(ndarray::Axis(0));
        let mut t = cols.mapv(inv_or_one);
        if a.cost == CostFn::L2Norm {
            let m = t.iter().cloned().fold(f64::INFINITY, f64::min);
            t.fill(m);
        }
        primal.push(t);
        rows.push(abs_c.sum_axis(ndarray::Axis(1)).mapv(inv_or_one));
    }
    Steps { primal, coupling: coupling_sums.mapv(inv_or_one), rows }
}

fn distance(a: &KktPoint, b: &KktPoint) -> (f64, f64) {
    let sq = |u: &Array1<f64>, v: &Array1<f64>| (u - v).mapv(|e| e * e).sum();
    let dx: f64 = a.x.iter().zip(&b.x).map(|(u, v)| sq(u, v)).sum();
    let dy: f64 = sq(&a.y, &b.y) + a.z.iter().zip(&b.z).map(|(u, v)| sq(u, v)).sum::<f64>();
    (dx.sqrt(), dy.sqrt())
}

fn blend(avg: &mut KktPoint, cur: &KktPoint, count: f64) {
    let w = 1.0 / count;
    let mix = |a: &mut Array1<f64>, c: &Array1<f64>| Zip::from(a).and(c).for_each(|a, &c| *a += w * (c - *a));
    avg.x.iter_mut().zip(&cur.x).for_each(|(a, c)| mix(a, c));
    mix(&mut avg.y, &cur.y);
    avg.z.iter_mut().zip(&cur.z).for_each(|(a, c)| mix(a, c));
}

/// One PDHG step with primal weight `omega`.
fn pdhg_step(p: &CoupledProblem, steps: &Steps, omega: f64, cur: &KktPoint) -> KktPoint {
    let (ps, ds) = (STEP_SAFETY / omega, STEP_SAFETY * omega);
    let mut x_new = Vec::with_capacity(cur.x.len());
    let mut coupling = -&p.q;
    let mut z_new = Vec::with_capacity(cur.z.len());
    for (i, a) in p.agents.iter().enumerate() {
        let x = &cur.x[i];
        let t = &steps.primal[i] * ps;
        let grad = a.e.t().dot(&cur.y) + a.c.t().dot(&cur.z[i]);
        let v = x - &(&t * &grad);
        let xn = a.prox_in_set_steps(v.view(), t.view());
        let extrap = &xn * 2.0 - x;
        coupling += &a.e.dot(&extrap);
        let row_step = &steps.rows[i] * ds;
        let zn = Zip::from(&cur.z[i])
            .and(&a.c.dot(&extrap))
            .and(&a.d)
            .and(&row_step)
            .map_collect(|&z, &cx, &d, &s| (z + s * (cx - d)).max(0.0));
        z_new.push(zn);
        x_new.push(xn);
    }
    let y_new = &cur.y + &(&steps.coupling * ds * &coupling);
    KktPoint { x: x_new, y: y_new, z: z_new }
}

pub fn reference_solve(p: &CoupledProblem, tol: f64) -> Result<OracleSolution> {
    reference_solve_with(p, &OracleOptions { tol, ..Default::default() })
}

pub fn reference_solve_with(p: &CoupledProblem, opts: &OracleOptions) -> Result<OracleSolution> {
    p.validate()?;
    let dim = p.total_k() + p.total_p();
    if dim > ORACLE_MAX_DIM {
        return Err(Error::InvalidArgument(format!("oracle is limited to {ORACLE_MAX_DIM} variables, got {dim}")));
    }
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(Error::InvalidArgument("oracle needs tol > 0 and max_iters >= 1".into()));
    }
    let steps = preconditioner(p);
    let mut omega = 1.0f64;
    let mut cur = KktPoint::zeros(p);
    let mut avg = cur.clone();
    let mut epoch_len = 0usize;
    let mut anchor = cur.clone();
    let mut anchor_kkt = kkt_residual(p, &cur)?;
    let mut prev_candidate_kkt = f64::INFINITY;
    let (mut best, mut best_kkt) = (cur.clone(), anchor_kkt);

    let mut iterations = 0;
    while iterations < opts.max_iters && best_kkt > opts.tol {
        cur = pdhg_step(p, &steps, omega, &cur);
        iterations += 1;
        epoch_len += 1;
        blend(&mut avg, &cur, epoch_len as f64);
        if iterations % CHECK_EVERY != 0 && iterations != opts.max_iters {
            continue;
        }
        let (k_cur, k_avg) = (kkt_residual(p, &cur)?, kkt_residual(p, &avg)?);
        let (candidate, k_cand) = if k_avg < k_cur { (&avg, k_avg) } else { (&cur, k_cur) };
        if k_cand < best_kkt {
            best = candidate.clone();
            best_kkt = k_cand;
        }
        let restart = k_cand <= RESTART_SUFFICIENT * anchor_kkt
            || (k_cand <= RESTART_NECESSARY * anchor_kkt && k_cand > prev_candidate_kkt)
            || epoch_len as f64 >= RESTART_ARTIFICIAL * iterations as f64;
        prev_candidate_kkt = k_cand;
        if restart {
            let candidate = candidate.clone();
            let (dx, dy) = distance(&candidate, &anchor);
            if dx > 1e-14 && dy > 1e-14 {
                omega = (0.5 * (dy / dx).ln() + 0.5 * omega.ln()).exp();
            }
            anchor = candidate.clone();
            anchor_kkt = k_cand;
            cur = candidate.clone();
            avg = candidate;
            epoch_len = 0;
            prev_candidate_kkt = f64::INFINITY;
        }
    }

    let converged = best_kkt <= opts.tol;
    if !converged {
        log::warn!("oracle stopped at the iteration cap with KKT residual {best_kkt:e}");
    }
    let r = p.agents.iter().zip(&best.x).map(|(a, x)| (&a.d - &a.c.dot(x)).mapv(|v| v.max(0.0))).collect();
    let zn: f64 = best.z.iter().map(|z| z.dot(z)).sum::<f64>().sqrt();
    Ok(OracleSolution {
        obj_star: p.objective_x(&best.x),
        kkt: best_kkt,
        iterations,
        converged,
        dual_norm: best.y.dot(&best.y).sqrt().max(zn),
        r,
        point: best,
    })
}
