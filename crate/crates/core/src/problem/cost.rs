//! Local cost functions and the simple sets they are restricted to.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::subsolvers::soft_threshold;

/// Per-agent cost `f_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum CostFn {
    /// `lambda * ||x||_1`
    #[serde(rename = "l1")]
    L1 { lambda: f64 },
    /// `||x||_2^2`
    #[serde(rename = "sq_l2")]
    SquaredL2,
    /// `||x||_2`
    #[serde(rename = "l2")]
    L2Norm,
    #[serde(rename = "zero")]
    Zero,
}

impl CostFn {
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        match *self {
            CostFn::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            CostFn::SquaredL2 => x.dot(&x),
            CostFn::L2Norm => x.dot(&x).sqrt(),
            CostFn::Zero => 0.0,
        }
    }

    /// `argmin_x f(x) + (beta/2)||x - v||^2`.
    pub fn prox(&self, v: ArrayView1<f64>, beta: f64) -> Array1<f64> {
        match *self {
            CostFn::L1 { lambda } => soft_threshold(v, lambda / beta),
            CostFn::SquaredL2 => v.mapv(|e| e * beta / (beta + 2.0)),
            CostFn::L2Norm => {
                let norm = v.dot(&v).sqrt();
                if norm * beta <= 1.0 {
                    Array1::zeros(v.len())
                } else {
                    let scale = 1.0 - 1.0 / (beta * norm);
                    v.mapv(|e| e * scale)
                }
            }
            CostFn::Zero => v.to_owned(),
        }
    }

    /// Prox under a diagonal metric: `argmin_x f(x) + sum_j (x_j - v_j)^2 / (2 steps_j)`.
    ///
    /// `L2Norm` is not separable; it uses `steps[0]` for the whole block and
    /// callers must pass uniform steps for it.
    pub fn prox_steps(&self, v: ArrayView1<f64>, steps: ArrayView1<f64>) -> Array1<f64> {
        match *self {
            CostFn::L1 { lambda } => Zip::from(v).and(steps).map_collect(|&e, &t| {
                let thr = lambda * t;
                e.signum() * (e.abs() - thr).max(0.0)
            }),
            CostFn::SquaredL2 => Zip::from(v).and(steps).map_collect(|&e, &t| e / (1.0 + 2.0 * t)),
            CostFn::L2Norm => self.prox(v, 1.0 / steps.first().copied().unwrap_or(1.0)),
            CostFn::Zero => v.to_owned(),
        }
    }

    pub fn is_separable(&self) -> bool {
        !matches!(self, CostFn::L2Norm)
    }

    /// Subdifferential of a separable cost at coordinate value `xj`, as a closed interval.
    pub(crate) fn subdiff_interval(&self, xj: f64) -> (f64, f64) {
        match *self {
            CostFn::L1 { lambda } => {
                if xj > 0.0 {
                    (lambda, lambda)
                } else if xj < 0.0 {
                    (-lambda, -lambda)
                } else {
                    (-lambda, lambda)
                }
            }
            CostFn::SquaredL2 => (2.0 * xj, 2.0 * xj),
            CostFn::Zero => (0.0, 0.0),
            CostFn::L2Norm => unreachable!("L2Norm is not separable"),
        }
    }
}

/// Simple constraint set `S_i` with a cheap Euclidean projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum SimpleSet {
    #[serde(rename = "full")]
    FullSpace,
    #[serde(rename = "nonneg")]
    NonnegativeOrthant,
    #[serde(rename = "box")]
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl SimpleSet {
    pub fn project_in_place(&self, v: &mut Array1<f64>) {
        match self {
            SimpleSet::FullSpace => {}
            SimpleSet::NonnegativeOrthant => v.mapv_inplace(|e| e.max(0.0)),
            SimpleSet::Box { lo, hi } => {
                for ((e, &l), &h) in v.iter_mut().zip(lo).zip(hi) {
                    *e = e.max(l).min(h);
                }
            }
        }
    }

    pub fn project(&self, v: ArrayView1<f64>) -> Array1<f64> {
        let mut out = v.to_owned();
        self.project_in_place(&mut out);
        out
    }

    pub fn contains(&self, v: ArrayView1<f64>) -> bool {
        match self {
            SimpleSet::FullSpace => v.iter().all(|e| !e.is_nan()),
            SimpleSet::NonnegativeOrthant => v.iter().all(|&e| e >= 0.0),
            SimpleSet::Box { lo, hi } => v.iter().zip(lo).zip(hi).all(|((&e, &l), &h)| e >= l && e <= h),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, SimpleSet::FullSpace)
    }

    /// Dimension the set is tied to, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            SimpleSet::Box { lo, .. } => Some(lo.len()),
            _ => None,
        }
    }

    /// Normal cone of the set at coordinate `j` with value `xj`, as a closed interval.
    pub(crate) fn normal_interval(&self, j: usize, xj: f64) -> (f64, f64) {
        match self {
            SimpleSet::FullSpace => (0.0, 0.0),
            SimpleSet::NonnegativeOrthant => {
                if xj <= 0.0 {
                    (f64::NEG_INFINITY, 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            SimpleSet::Box { lo, hi } => {
                let (l, h) = (lo[j], hi[j]);
                match (xj <= l, xj >= h) {
                    (true, true) => (f64::NEG_INFINITY, f64::INFINITY),
                    (true, false) => (f64::NEG_INFINITY, 0.0),
                    (false, true) => (0.0, f64::INFINITY),
                    (false, false) => (0.0, 0.0),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_costs() -> Vec<CostFn> {
        vec![CostFn::L1 { lambda: 0.7 }, CostFn::SquaredL2, CostFn::L2Norm, CostFn::Zero]
    }

    #[test]
    fn values() {
        assert_eq!(CostFn::L1 { lambda: 2.0 }.value(array![1.0, -3.0].view()), 8.0);
        assert_eq!(CostFn::SquaredL2.value(array![1.0, 2.0].view()), 5.0);
        assert_eq!(CostFn::L2Norm.value(array![3.0, 4.0].view()), 5.0);
        for f in all_costs() {
            assert_eq!(f.value(Array1::zeros(3).view()), 0.0);
        }
    }

    // Random-perturbation oracle: the prox output must beat every nearby candidate.
    #[test]
    fn prox_beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in all_costs() {
            for _ in 0..20 {
                let v: Array1<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                let beta = rng.random_range(0.2..5.0);
                let obj = |x: &Array1<f64>| f.value(x.view()) + 0.5 * beta * (x - &v).dot(&(x - &v));
                let p = f.prox(v.view(), beta);
                let best = obj(&p);
                for _ in 0..1000 {
                    let scale = rng.random_range(1e-4..1.0);
                    let cand: Array1<f64> = p.mapv(|e| e + scale * rng.random_range(-1.0..1.0));
                    assert!(obj(&cand) >= best - 1e-12, "{f:?}");
                }
            }
        }
    }

    #[test]
    fn prox_steps_matches_uniform_prox() {
        let v = array![1.5, -0.2, 0.9];
        let steps = Array1::from_elem(3, 0.25);
        for f in all_costs() {
            let a = f.prox(v.view(), 4.0);
            let b = f.prox_steps(v.view(), steps.view());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn projection_is_closest_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sets = [
            SimpleSet::FullSpace,
            SimpleSet::NonnegativeOrthant,
            SimpleSet::Box { lo: vec![-1.0, 0.0, 0.5], hi: vec![1.0, 2.0, 0.5] },
        ];
        for s in &sets {
            let v: Array1<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = s.project(v.view());
            assert!(s.contains(p.view()));
            let d = (&p - &v).dot(&(&p - &v));
            for _ in 0..10_000 {
                let mut m: Array1<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
                s.project_in_place(&mut m);
                assert!(s.contains(m.view()));
                assert!((&m - &v).dot(&(&m - &v)) >= d - 1e-12);
            }
        }
    }

    #[test]
    fn json_tags() {
        let c: CostFn = serde_json::from_str(r#"{"type":"l1","lambda":2.5}"#).unwrap();
        assert_eq!(c, CostFn::L1 { lambda: 2.5 });
        let s: SimpleSet = serde_json::from_str(r#"{"type":"box","lo":[0],"hi":[1]}"#).unwrap();
        assert_eq!(s, SimpleSet::Box { lo: vec![0.0], hi: vec![1.0] });
        assert_eq!(serde_json::to_string(&CostFn::SquaredL2).unwrap(), r#"{"type":"sq_l2"}"#);
    }

    proptest! {
        #[test]
        fn prox_is_nonexpansive(
            a in proptest::collection::vec(-5.0f64..5.0, 4),
            b in proptest::collection::vec(-5.0f64..5.0, 4),
            beta in 0.1f64..10.0,
        ) {
            let (a, b) = (Array1::from(a), Array1::from(b));
            for f in all_costs() {
                let d = &f.prox(a.view(), beta) - &f.prox(b.view(), beta);
                prop_assert!(d.dot(&d).sqrt() <= (&a - &b).dot(&(&a - &b)).sqrt() + 1e-12);
            }
        }

        #[test]
        fn projection_idempotent(v in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let v = Array1::from(v);
            let s = SimpleSet::Box { lo: vec![-1.0, -2.0, 0.0], hi: vec![1.0, 0.0, 3.0] };
            let p = s.project(v.view());
            prop_assert_eq!(s.project(p.view()), p.clone());
            prop_assert!(s.contains(p.view()));
            let n = SimpleSet::NonnegativeOrthant.project(v.view());
            prop_assert_eq!(SimpleSet::NonnegativeOrthant.project(n.view()), n);
        }
    }
}
