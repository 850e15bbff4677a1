//! Algorithmic graphs and their matrices.
//!
//! Nodes are labelled `1..=n` in every public API (edges, predecessor maps,
//! error messages). Matrix rows and columns are the zero-based images of those
//! labels, so node `i` lives in row `i - 1`. Edges are forward (`i < j`) and
//! kept sorted lexicographically; the position of an edge in that order is its
//! column in the incidence matrix.

mod matrices;
mod onto;
mod triple;

pub use matrices::{structure_matrices, GraphMatrices};
pub use onto::{algebraic_connectivity, complete_onto_decomposition, onto_decomposition};
pub use triple::{predecessor_map, GraphTriple, Preset};

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// A forward edge `(from, to)` with `from < to`, one-based.
pub type Edge = (usize, usize);

/// Directed graph on `1..=n` whose edges all point forward.
///
/// Connectivity is computed but only enforced by [`AlgorithmicGraph::connected`]
/// and by the places that need it (the main graph and its Laplacian subgraph).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgorithmicGraph {
    n: usize,
    edges: Vec<Edge>,
    connected: bool,
}

impl AlgorithmicGraph {
    /// Validates and canonicalizes an edge list. Connectivity is not required.
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if n < 2 {
            return Err(Error::OrderTooSmall { n, min: 2 });
        }
        let mut seen = BTreeSet::new();
        for (i, j) in edges {
            for node in [i, j] {
                if node == 0 || node > n {
                    return Err(Error::NodeOutOfRange { node, n });
                }
            }
            if i >= j {
                return Err(Error::EdgeOrderViolation(i, j));
            }
            if !seen.insert((i, j)) {
                return Err(Error::DuplicateEdge(i, j));
            }
        }
        let edges: Vec<Edge> = seen.into_iter().collect();
        let connected = is_connected(n, &edges);
        Ok(Self {
            n,
            edges,
            connected,
        })
    }

    /// Like [`AlgorithmicGraph::new`] but rejects disconnected graphs.
    pub fn connected(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let g = Self::new(n, edges)?;
        g.require_connected()?;
        Ok(g)
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.connected {
            Ok(())
        } else {
            Err(Error::NotConnected { n: self.n })
        }
    }

    /// The path `1 -> 2 -> ... -> n`.
    pub fn sequential(n: usize) -> Result<Self> {
        Self::connected(n, (1..n).map(|i| (i, i + 1)))
    }

    /// The sequential path closed by the edge `(1, n)`. Needs `n >= 3`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::OrderTooSmall { n, min: 3 });
        }
        Self::connected(n, (1..n).map(|i| (i, i + 1)).chain([(1, n)]))
    }

    /// Star with every edge leaving node 1.
    pub fn parallel_up(n: usize) -> Result<Self> {
        Self::connected(n, (2..=n).map(|j| (1, j)))
    }

    /// Star with every edge entering node n.
    pub fn parallel_down(n: usize) -> Result<Self> {
        Self::connected(n, (1..n).map(|i| (i, n)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::connected(n, (1..=n).flat_map(|i| ((i + 1)..=n).map(move |j| (i, j))))
    }

    /// Union of parallel-up and parallel-down.
    pub fn biparallel(n: usize) -> Result<Self> {
        Self::parallel_up(n)?.union(&Self::parallel_down(n)?)
    }

    /// Edge-set union of two graphs of the same order.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                what: "graph order",
                expected: self.n,
                found: other.n,
            });
        }
        let edges: BTreeSet<Edge> = self.edges.iter().chain(&other.edges).copied().collect();
        Self::new(self.n, edges)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn contains_edge(&self, edge: Edge) -> bool {
        self.edges.binary_search(&edge).is_ok()
    }

    pub fn is_tree(&self) -> bool {
        self.connected && self.edges.len() == self.n - 1
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * (self.n - 1) / 2
    }

    pub fn is_subgraph_of(&self, parent: &Self) -> bool {
        self.n == parent.n && self.edges.iter().all(|&e| parent.contains_edge(e))
    }

    /// `d_i = d_i^in + d_i^out`, indexed by node - 1.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i - 1] += 1;
            d[j - 1] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(_, j) in &self.edges {
            d[j - 1] += 1;
        }
        d
    }

    /// Sources of the in-edges of `node`, ascending, one-based.
    pub fn in_neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, j)| j == node)
            .map(|&(i, _)| i)
            .collect()
    }

    /// The graph on the same nodes with edges `E(self) \ E(sub)`.
    pub fn complement_subgraph(&self, sub: &Self) -> Result<Self> {
        complement_subgraph(self, sub)
    }
}

impl fmt::Display for AlgorithmicGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} edges={{", self.n)?;
        for (k, (i, j)) in self.edges.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({i},{j})")?;
        }
        write!(f, "}}")
    }
}

/// Edges of `g` not in `sub`. The result need not be connected.
pub fn complement_subgraph(g: &AlgorithmicGraph, sub: &AlgorithmicGraph) -> Result<AlgorithmicGraph> {
    if g.n != sub.n {
        return Err(Error::DimensionMismatch {
            what: "graph order",
            expected: g.n,
            found: sub.n,
        });
    }
    if let Some(&(i, j)) = sub.edges.iter().find(|&&e| !g.contains_edge(e)) {
        return Err(Error::NotASubgraph(i, j));
    }
    AlgorithmicGraph::new(
        g.n,
        g.edges.iter().copied().filter(|&e| !sub.contains_edge(e)),
    )
}

fn is_connected(n: usize, edges: &[Edge]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i - 1].push(j - 1);
        adj[j - 1].push(i - 1);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}
