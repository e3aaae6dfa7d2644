//! Two-block ADMM for the DC-ADMM agent subproblem
//!
//! ```text
//! min_{x in S}  f(x) + h(x)   s.t.  C x <= d
//! ```
//!
//! split as `s = C x` with the indicator of `{s <= d}` on `s`. The `x` block
//! is solved by accelerated proximal-gradient sweeps, the `s` block is a clamp.
//! Stops when the dimension-normalized primal plus dual residual drops below
//! `eps1`.

use ndarray::{Array1, ArrayView1, Zip};

use super::{lambda_max, ConsensusTerm, InnerReport};
use crate::error::{Error, Result};

/// Cap on proximal-gradient sweeps inside one `x` update.
pub const X_UPDATE_CAP: usize = 2000;

/// Warm-start state carried between outer iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerAdmmState {
    pub s: Array1<f64>,
    /// Scaled dual of `s = C x`.
    pub u: Array1<f64>,
}

impl InnerAdmmState {
    pub fn new(rows: usize) -> Self {
        Self { s: Array1::zeros(rows), u: Array1::zeros(rows) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InnerAdmmSolver {
    c1: f64,
    eps1: f64,
    max_inner: usize,
    lipschitz: f64,
}

impl InnerAdmmSolver {
    pub fn new(term: &ConsensusTerm, c1: f64, eps1: f64, max_inner: usize) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(Error::InvalidArgument(format!("c1 must be > 0, got {c1}")));
        }
        if !(eps1 > 0.0) {
            return Err(Error::InvalidArgument(format!("eps1 must be > 0, got {eps1}")));
        }
        if max_inner == 0 {
            return Err(Error::InvalidArgument("inner iteration cap must be >= 1".into()));
        }
        if !(term.c > 0.0) || term.degree == 0 {
            return Err(Error::InvalidArgument("c must be positive and the agent must have neighbors".into()));
        }
        let a = term.agent;
        let mut m = a.e.t().dot(&a.e) * term.hessian_scale();
        if a.p() > 0 {
            m.scaled_add(c1, &a.c.t().dot(&a.c));
        }
        let lipschitz = lambda_max(&m)? * 1.01;
        Ok(Self { c1, eps1, max_inner, lipschitz: if lipschitz > 0.0 { lipschitz } else { 1.0 } })
    }

    /// Accelerated proximal gradient on
    /// `f(x) + h(x) + c1/2 ||C x - target||^2` over `S`, warm-started at `x0`.
    fn x_update(
        &self,
        term: &ConsensusTerm,
        w0: &Array1<f64>,
        target: &Array1<f64>,
        x0: Array1<f64>,
        tol: f64,
    ) -> Array1<f64> {
        let a = term.agent;
        let step = 1.0 / self.lipschitz;
        let rms = (a.k() as f64).sqrt();
        let grad = |y: &Array1<f64>| {
            let mut g = term.gradient(y.view(), w0);
            if a.p() > 0 {
                let res = a.c.dot(y) - target;
                g.scaled_add(self.c1, &a.c.t().dot(&res));
            }
            g
        };
        let mut x = x0;
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..X_UPDATE_CAP {
            let mut v = y.clone();
            v.scaled_add(-step, &grad(&y));
            let x_new = a.prox_in_set(v.view(), self.lipschitz);

            let dx = &x_new - &x;
            let change = dx.dot(&dx).sqrt() / rms;
            // gradient-mapping restart keeps the momentum from overshooting
            let restart = Zip::from(&y).and(&x_new).and(&dx).fold(0.0, |acc, &yv, &xn, &d| acc + (yv - xn) * d) > 0.0;
            if restart {
                t = 1.0;
                y = x_new.clone();
            } else {
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = &x_new + &(&dx * ((t - 1.0) / t_new));
                t = t_new;
            }
            x = x_new;
            if change <= tol {
                break;
            }
        }
        x
    }

    pub fn solve(
        &self,
        term: &ConsensusTerm,
        x0: ArrayView1<f64>,
        state: &mut InnerAdmmState,
    ) -> Result<(Array1<f64>, InnerReport)> {
        let a = term.agent;
        if x0.len() != a.k() {
            return Err(Error::Dimension("inner ADMM warm start has the wrong length".into()));
        }
        let w0 = term.offset();
        let x_tol = 0.1 * self.eps1;
        if a.p() == 0 {
            let x = self.x_update(term, &w0, &Array1::zeros(0), x0.to_owned(), x_tol);
            return Ok((x, InnerReport { iterations: 1, residual: 0.0, hit_cap: false }));
        }
        if state.s.len() != a.p() || state.u.len() != a.p() {
            *state = InnerAdmmState::new(a.p());
            state.s = a.c.dot(&x0);
            state.s.zip_mut_with(&a.d, |s, &d| *s = s.min(d));
        }
        let (rms_p, rms_k) = ((a.p() as f64).sqrt(), (a.k() as f64).sqrt());
        let mut x = x0.to_owned();
        let mut residual = f64::INFINITY;
        for it in 1..=self.max_inner {
            let target = &state.s - &state.u;
            x = self.x_update(term, &w0, &target, x, x_tol);
            let cx = a.c.dot(&x);
            let s_old = std::mem::replace(
                &mut state.s,
                Zip::from(&cx).and(&state.u).and(&a.d).map_collect(|&cv, &uv, &dv| (cv + uv).min(dv)),
            );
            let primal = &cx - &state.s;
            state.u += &primal;
            let dual = a.c.t().dot(&(&state.s - &s_old)) * self.c1;
            residual = primal.dot(&primal).sqrt() / rms_p + dual.dot(&dual).sqrt() / rms_k;
            if residual <= self.eps1 {
                return Ok((x, InnerReport { iterations: it, residual, hit_cap: false }));
            }
        }
        Ok((x, InnerReport { iterations: self.max_inner, residual, hit_cap: true }))
    }
}

/// One-shot solve from a cold dual state.
pub fn inner_admm_solve(
    term: &ConsensusTerm,
    x0: ArrayView1<f64>,
    eps1: f64,
    c1: f64,
    max_inner: usize,
) -> Result<(Array1<f64>, InnerReport)> {
    let mut state = InnerAdmmState::new(0);
    InnerAdmmSolver::new(term, c1, eps1, max_inner)?.solve(term, x0, &mut state)
}
