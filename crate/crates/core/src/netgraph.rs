//! Undirected agent network.
//!
//! Nodes are `0..n`. Edges are stored once as `(i, j)` with `i < j`; every
//! node keeps a sorted neighbor list together with the id of the edge that
//! connects it to each neighbor, so per-edge state can live in a flat vector.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Attempts made by [`Graph::random_connected`] before giving up.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    incident: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        Graph::new(repr.n, repr.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr { n: g.n, edges: g.edges.iter().map(|&(i, j)| [i, j]).collect() }
    }
}

impl Graph {
    /// Builds a graph from an edge list. Pairs may be given in either
    /// orientation; duplicates collapse. Self-loops are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(Error::NodeOutOfRange { index: idx, n });
                }
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at node {a}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();

        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (id, &(i, j)) in edges.iter().enumerate() {
            adj[i].push((j, id));
            adj[j].push((i, id));
        }
        let mut neighbors = Vec::with_capacity(n);
        let mut incident = Vec::with_capacity(n);
        for mut list in adj {
            list.sort_unstable();
            neighbors.push(list.iter().map(|&(j, _)| j).collect());
            incident.push(list.iter().map(|&(_, e)| e).collect());
        }
        Ok(Self { n, edges, neighbors, incident })
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Erdős–Rényi sample with edge probability `edge_prob`, redrawn until
    /// connected. Deterministic in `seed`.
    pub fn random_connected(n: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("random graph needs n >= 2, got {n}")));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(Error::InvalidArgument(format!("edge_prob must lie in (0, 1], got {edge_prob}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_SAMPLING_ATTEMPTS {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < edge_prob {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::new(n, edges)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::GraphSampling { n, edge_prob, attempts: MAX_SAMPLING_ATTEMPTS })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, sorted; the position is the edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.neighbors.get(i).map(Vec::as_slice).ok_or(Error::NodeOutOfRange { index: i, n: self.n })
    }

    /// Edge ids aligned with [`Graph::neighbors`].
    pub fn incident_edges(&self, i: usize) -> Result<&[usize]> {
        self.incident.get(i).map(Vec::as_slice).ok_or(Error::NodeOutOfRange { index: i, n: self.n })
    }

    pub(crate) fn nbrs(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub(crate) fn inc(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Position of `j` inside the neighbor list of `i`.
    pub fn slot_of(&self, i: usize, j: usize) -> Option<usize> {
        self.neighbors.get(i)?.binary_search(&j).ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Checks the preconditions the solvers rely on: connected, no isolated node.
    pub fn validate_for_solver(&self) -> Result<()> {
        if let Some(i) = (0..self.n).find(|&i| self.neighbors[i].is_empty()) {
            if self.n > 1 {
                return Err(Error::Disconnected);
            }
            return Err(Error::IsolatedNode(i));
        }
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(())
    }
}
