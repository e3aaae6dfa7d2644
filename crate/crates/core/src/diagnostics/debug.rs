use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::netgraph::Graph;

/// Relative tolerance for the dual-conservation identities.
pub const DUAL_IDENTITY_TOL: f64 = 1e-9;

/// Explicit per-edge duals. `u[i][s]` is `u_ij` and `v[i][s]` is `v_ij`
/// where `j` is the `s`-th neighbor of `i`. `u_ij` prices `y_i = t_ij`,
/// `v_ij` prices `y_j = t_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDualDebug {
    pub u: Vec<Vec<Array1<f64>>>,
    pub v: Vec<Vec<Array1<f64>>>,
}

impl EdgeDualDebug {
    pub fn new(graph: &Graph, l: usize) -> Self {
        let zeros = |i: usize| vec![Array1::zeros(l); graph.degree(i)];
        Self { u: (0..graph.n()).map(zeros).collect(), v: (0..graph.n()).map(zeros).collect() }
    }

    /// Agent `i`'s share of a dual step over the edge to its neighbor in
    /// slot `slot`: `u_ij += c (y_i - t)` and `v_ji += c (y_i - t)`.
    pub fn step(&mut self, graph: &Graph, i: usize, slot: usize, c: f64, y_i: &Array1<f64>, t: &Array1<f64>) {
        let j = graph.nbrs(i)[slot];
        let back = graph.slot_of(j, i).expect("graph adjacency is symmetric");
        let incr = (y_i - t) * c;
        self.u[i][slot] += &incr;
        self.v[j][back] += &incr;
    }

    /// `max |u_ij + v_ij| / (1 + max |u|)` over all directed edges.
    pub fn uv_ratio(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (ui, vi) in self.u.iter().zip(&self.v) {
            for (u, v) in ui.iter().zip(vi) {
                scale = u.iter().fold(scale, |m, x| m.max(x.abs()));
                worst = u.iter().zip(v).fold(worst, |m, (a, b)| m.max((a + b).abs()));
            }
        }
        worst / (1.0 + scale)
    }

    /// `max_i ||p_i - sum_j (u_ij + v_ji)||_inf / (1 + max_i ||p_i||_inf)`.
    pub fn aggregation_ratio(&self, graph: &Graph, p: &[Array1<f64>]) -> f64 {
        let scale = 1.0 + inf_norm_max(p);
        let mut worst = 0.0f64;
        for (i, pi) in p.iter().enumerate() {
            let mut agg = Array1::<f64>::zeros(pi.len());
            for (slot, &j) in graph.nbrs(i).iter().enumerate() {
                agg += &self.u[i][slot];
                agg += &self.v[j][graph.slot_of(j, i).expect("graph adjacency is symmetric")];
            }
            worst = pi.iter().zip(&agg).fold(worst, |m, (a, b)| m.max((a - b).abs()));
        }
        worst / scale
    }
}

pub(crate) fn inf_norm_max(vs: &[Array1<f64>]) -> f64 {
    vs.iter().flat_map(|v| v.iter()).fold(0.0, |m, x| m.max(x.abs()))
}

/// Worst values of the runtime invariants seen over a debug run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DebugReport {
    pub iterations_checked: usize,
    /// `max_k ||sum_i p_i||_inf / (1 + max_i ||p_i||_inf)`.
    pub sum_p_ratio: f64,
    pub uv_ratio: f64,
    pub aggregation_ratio: f64,
    /// Edges whose stored value differs when read from its two endpoints.
    pub t_asymmetries: usize,
    /// Iterates outside their simple set.
    pub set_violations: usize,
    /// Slack entries below zero.
    pub negative_slacks: usize,
    /// BSUM sweeps that increased the subproblem objective. Only counted
    /// when the majorizer is valid (`beta_factor >= 1.01`).
    pub bsum_increases: usize,
    pub bsum_sweeps_checked: usize,
    /// Idle agents whose state changed.
    pub idle_changes: usize,
}

impl DebugReport {
    pub fn passed(&self) -> bool {
        self.sum_p_ratio <= DUAL_IDENTITY_TOL
            && self.uv_ratio <= DUAL_IDENTITY_TOL
            && self.aggregation_ratio <= DUAL_IDENTITY_TOL
            && self.t_asymmetries == 0
            && self.set_violations == 0
            && self.negative_slacks == 0
            && self.bsum_increases == 0
            && self.idle_changes == 0
    }

    /// Human-readable list of failed checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut ratio = |name: &str, v: f64| {
            if v > DUAL_IDENTITY_TOL {
                out.push(format!("{name} = {v:e}"));
            }
        };
        ratio("sum_p_ratio", self.sum_p_ratio);
        ratio("uv_ratio", self.uv_ratio);
        ratio("aggregation_ratio", self.aggregation_ratio);
        for (name, n) in [
            ("t_asymmetries", self.t_asymmetries),
            ("set_violations", self.set_violations),
            ("negative_slacks", self.negative_slacks),
            ("bsum_increases", self.bsum_increases),
            ("idle_changes", self.idle_changes),
        ] {
            if n > 0 {
                out.push(format!("{name} = {n}"));
            }
        }
        out
    }

    pub fn observe_sum_p(&mut self, p: &[Array1<f64>]) {
        let mut sum = Array1::<f64>::zeros(p.first().map_or(0, |v| v.len()));
        for pi in p {
            sum += pi;
        }
        let ratio = sum.iter().fold(0.0f64, |m, x| m.max(x.abs())) / (1.0 + inf_norm_max(p));
        self.sum_p_ratio = self.sum_p_ratio.max(ratio);
    }

    pub fn observe_edge_duals(&mut self, duals: &EdgeDualDebug, graph: &Graph, p: &[Array1<f64>]) {
        self.uv_ratio = self.uv_ratio.max(duals.uv_ratio());
        self.aggregation_ratio = self.aggregation_ratio.max(duals.aggregation_ratio(graph, p));
    }

    /// Counts sweeps whose objective rose by more than rounding noise.
    pub fn observe_bsum_trace(&mut self, objective_trace: &[f64]) {
        for w in objective_trace.windows(2) {
            self.bsum_sweeps_checked += 1;
            if w[1] > w[0] + 1e-12 * (1.0 + w[0].abs()) {
                self.bsum_increases += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn co_updated_edge_duals_cancel() {
        let g = Graph::path(3).unwrap();
        let mut d = EdgeDualDebug::new(&g, 1);
        let y = [array![1.0], array![3.0], array![-2.0]];
        let c = 0.5;
        for &(a, b) in g.edges() {
            let t = (&y[a] + &y[b]) * 0.5;
            for (i, j) in [(a, b), (b, a)] {
                d.step(&g, i, g.slot_of(i, j).unwrap(), c, &y[i], &t);
            }
        }
        assert_eq!(d.uv_ratio(), 0.0);
        // p_i built independently as c * sum_j (y_i - y_j)
        let p: Vec<_> =
            (0..3).map(|i| g.nbrs(i).iter().fold(array![0.0], |acc, &j| acc + (&y[i] - &y[j]) * c)).collect();
        assert!(d.aggregation_ratio(&g, &p) < 1e-15);
        let mut rep = DebugReport::default();
        rep.observe_sum_p(&p);
        rep.observe_edge_duals(&d, &g, &p);
        assert!(rep.passed(), "{:?}", rep.failures());
    }

    #[test]
    fn one_sided_update_is_flagged() {
        let g = Graph::path(2).unwrap();
        let mut d = EdgeDualDebug::new(&g, 1);
        d.step(&g, 0, 0, 1.0, &array![2.0], &array![0.0]);
        assert!(d.uv_ratio() > 0.1);
    }

    #[test]
    fn bsum_increase_counted() {
        let mut rep = DebugReport::default();
        rep.observe_bsum_trace(&[3.0, 2.0, 2.0, 2.5]);
        assert_eq!(rep.bsum_sweeps_checked, 3);
        assert_eq!(rep.bsum_increases, 1);
        assert!(!rep.passed());
        assert_eq!(rep.failures(), vec!["bsum_increases = 1".to_string()]);
    }
}
