use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use super::{onto_decomposition, AlgorithmicGraph, Edge};
use crate::error::{Error, Result};

/// Predecessor map of the forward-evaluation graph: `p(i)` for `i = 2..=n`.
///
/// Returned as a vector of length `n - 1` where entry `i - 2` holds `p(i)`
/// (one-based).
pub fn predecessor_map(edges: &[Edge], n: usize) -> Result<Vec<usize>> {
    let mut pred = vec![Vec::new(); n + 1];
    for &(i, j) in edges {
        if j == 0 || j > n || i == 0 || i > n {
            return Err(Error::NodeOutOfRange { node: i.max(j), n });
        }
        pred[j].push(i);
    }
    if !pred[1].is_empty() {
        // node 1 has no predecessor slot; an in-edge into it is a backward edge
        return Err(Error::InDegreeViolation {
            node: 1,
            count: pred[1].len(),
        });
    }
    (2..=n)
        .map(|node| match pred[node].as_slice() {
            [p] => Ok(*p),
            other => Err(Error::InDegreeViolation {
                node,
                count: other.len(),
            }),
        })
        .collect()
}

/// A validated `(G, G', G'')` triple with the data the solvers consume.
///
/// * `G` decides which resolvent outputs feed later resolvents.
/// * `G'` (connected, spanning) fixes the onto decomposition `Z` of its
///   Laplacian, which couples governing and resolvent variables.
/// * `G''` (every node `i >= 2` with in-degree one) decides where each forward
///   operator is evaluated: `B_{i-1}` is applied to `x_{p(i)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTriple {
    g: AlgorithmicGraph,
    gp: AlgorithmicGraph,
    gpp: AlgorithmicGraph,
    pred: Vec<usize>,
    z: DMatrix<f64>,
    degrees: Vec<f64>,
    in_neighbors: Vec<Vec<usize>>,
}

impl GraphTriple {
    /// Validates the triple and computes the canonical `Z` for `G'`.
    pub fn new(g: AlgorithmicGraph, gp: AlgorithmicGraph, gpp: AlgorithmicGraph) -> Result<Self> {
        let z = onto_decomposition(&gp)?;
        Self::with_onto(g, gp, gpp, z)
    }

    /// Same as [`GraphTriple::new`] with a caller-supplied onto decomposition.
    pub fn with_onto(
        g: AlgorithmicGraph,
        gp: AlgorithmicGraph,
        gpp: AlgorithmicGraph,
        z: DMatrix<f64>,
    ) -> Result<Self> {
        g.require_connected()?;
        gp.require_connected()?;
        let n = g.order();
        for sub in [&gp, &gpp] {
            if sub.order() != n {
                return Err(Error::DimensionMismatch {
                    what: "subgraph order",
                    expected: n,
                    found: sub.order(),
                });
            }
            if let Some(&(i, j)) = sub.edges().iter().find(|&&e| !g.contains_edge(e)) {
                return Err(Error::NotASubgraph(i, j));
            }
        }
        if z.shape() != (n, n - 1) {
            return Err(Error::DimensionMismatch {
                what: "onto decomposition rows",
                expected: n,
                found: z.nrows(),
            });
        }
        let pred = predecessor_map(gpp.edges(), n)?;
        let degrees = g.degrees().into_iter().map(|d| d as f64).collect();
        let in_neighbors = (1..=n)
            .map(|i| g.in_neighbors(i).into_iter().map(|h| h - 1).collect())
            .collect();
        Ok(Self {
            g,
            gp,
            gpp,
            pred,
            z,
            degrees,
            in_neighbors,
        })
    }

    pub fn order(&self) -> usize {
        self.g.order()
    }

    pub fn graph(&self) -> &AlgorithmicGraph {
        &self.g
    }

    pub fn laplacian_subgraph(&self) -> &AlgorithmicGraph {
        &self.gp
    }

    pub fn forward_subgraph(&self) -> &AlgorithmicGraph {
        &self.gpp
    }

    /// `Z`, `n x (n-1)`.
    pub fn onto(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Degrees of `G`, indexed by node - 1.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `p(i)` for one-based `i >= 2`, one-based.
    pub fn predecessor(&self, i: usize) -> usize {
        self.pred[i - 2]
    }

    /// The whole predecessor map (entry `i - 2` is `p(i)`).
    pub fn predecessors(&self) -> &[usize] {
        &self.pred
    }

    /// Zero-based sources of the `G` in-edges of zero-based node `i`.
    pub(crate) fn in_neighbors0(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Builds the triple a named method uses.
    pub fn preset(kind: Preset, n: usize) -> Result<Self> {
        kind.triple(n)
    }
}

/// The named graph configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    /// `G` ring, `G' = G''` sequential.
    Ring,
    /// All three sequential.
    Sequential,
    /// All three parallel-up.
    Parallel,
    /// `G = G'` complete, `G''` sequential.
    CompleteSeq,
    /// `G = G'` complete, `G''` parallel-up.
    CompletePar,
    /// The unique order-2 triple.
    DavisYin,
    /// `G` biparallel, `G'` parallel-down, `G''` parallel-up.
    BiparallelLimit,
    /// Order 3: `G` complete, `G'` parallel-down, `G''` = `{(1,2), (p3,3)}`.
    FourOperator { p3: usize },
}

impl Preset {
    /// The five configurations compared in the benchmark.
    pub const BENCHMARK: [Preset; 5] = [
        Preset::Ring,
        Preset::Sequential,
        Preset::Parallel,
        Preset::CompleteSeq,
        Preset::CompletePar,
    ];

    pub const ALL: [Preset; 9] = [
        Preset::Ring,
        Preset::Sequential,
        Preset::Parallel,
        Preset::CompleteSeq,
        Preset::CompletePar,
        Preset::DavisYin,
        Preset::BiparallelLimit,
        Preset::FourOperator { p3: 1 },
        Preset::FourOperator { p3: 2 },
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ring => "ring",
            Preset::Sequential => "sequential",
            Preset::Parallel => "parallel",
            Preset::CompleteSeq => "complete_seq",
            Preset::CompletePar => "complete_par",
            Preset::DavisYin => "davis_yin",
            Preset::BiparallelLimit => "biparallel_limit",
            Preset::FourOperator { p3: 1 } => "four_operator_p1",
            Preset::FourOperator { .. } => "four_operator_p2",
        }
    }

    pub fn supports(self, n: usize) -> bool {
        match self {
            Preset::Ring | Preset::BiparallelLimit => n >= 3,
            Preset::Sequential | Preset::Parallel | Preset::CompleteSeq | Preset::CompletePar => {
                n >= 2
            }
            Preset::DavisYin => n == 2,
            Preset::FourOperator { p3 } => n == 3 && (p3 == 1 || p3 == 2),
        }
    }

    /// Whether `G = G'` is complete, so the specialized method applies.
    pub fn is_complete(self) -> bool {
        matches!(self, Preset::CompleteSeq | Preset::CompletePar)
    }

    pub fn triple(self, n: usize) -> Result<GraphTriple> {
        if !self.supports(n) {
            return Err(Error::UnsupportedOrder {
                kind: self.name().to_string(),
                n,
            });
        }
        let (g, gp, gpp) = match self {
            Preset::Ring => {
                let seq = AlgorithmicGraph::sequential(n)?;
                (AlgorithmicGraph::ring(n)?, seq.clone(), seq)
            }
            Preset::Sequential | Preset::DavisYin => {
                let seq = AlgorithmicGraph::sequential(n)?;
                (seq.clone(), seq.clone(), seq)
            }
            Preset::Parallel => {
                let par = AlgorithmicGraph::parallel_up(n)?;
                (par.clone(), par.clone(), par)
            }
            Preset::CompleteSeq => {
                let k = AlgorithmicGraph::complete(n)?;
                (k.clone(), k, AlgorithmicGraph::sequential(n)?)
            }
            Preset::CompletePar => {
                let k = AlgorithmicGraph::complete(n)?;
                (k.clone(), k, AlgorithmicGraph::parallel_up(n)?)
            }
            Preset::BiparallelLimit => (
                AlgorithmicGraph::biparallel(n)?,
                AlgorithmicGraph::parallel_down(n)?,
                AlgorithmicGraph::parallel_up(n)?,
            ),
            Preset::FourOperator { p3 } => (
                AlgorithmicGraph::complete(3)?,
                AlgorithmicGraph::parallel_down(3)?,
                AlgorithmicGraph::new(3, [(1, 2), (p3, 3)])?,
            ),
        };
        GraphTriple::new(g, gp, gpp)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ring" => Preset::Ring,
            "sequential" => Preset::Sequential,
            "parallel" => Preset::Parallel,
            "complete_seq" => Preset::CompleteSeq,
            "complete_par" => Preset::CompletePar,
            "davis_yin" => Preset::DavisYin,
            "biparallel_limit" => Preset::BiparallelLimit,
            "four_operator_p1" => Preset::FourOperator { p3: 1 },
            "four_operator_p2" => Preset::FourOperator { p3: 2 },
            other => return Err(Error::Parse(format!("unknown method `{other}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predecessor_maps() {
        let seq = AlgorithmicGraph::sequential(4).unwrap();
        assert_eq!(predecessor_map(seq.edges(), 4).unwrap(), vec![1, 2, 3]);
        let par = AlgorithmicGraph::parallel_up(4).unwrap();
        assert_eq!(predecessor_map(par.edges(), 4).unwrap(), vec![1, 1, 1]);
        assert_eq!(
            predecessor_map(&[(1, 3), (2, 3)], 3),
            Err(Error::InDegreeViolation { node: 2, count: 0 })
        );
        assert_eq!(
            predecessor_map(&[(1, 2), (1, 3), (2, 3)], 3),
            Err(Error::InDegreeViolation { node: 3, count: 2 })
        );
    }

    #[test]
    fn ring_preset() {
        let t = Preset::Ring.triple(4).unwrap();
        assert_eq!(t.graph().edges(), &[(1, 2), (1, 4), (2, 3), (3, 4)]);
        assert_eq!(t.laplacian_subgraph().edges(), &[(1, 2), (2, 3), (3, 4)]);
        assert_eq!(t.forward_subgraph(), t.laplacian_subgraph());
    }

    #[test]
    fn preset_degrees() {
        assert_eq!(
            Preset::Sequential.triple(5).unwrap().degrees(),
            &[1.0, 2.0, 2.0, 2.0, 1.0]
        );
        assert_eq!(
            Preset::Parallel.triple(4).unwrap().degrees(),
            &[3.0, 1.0, 1.0, 1.0]
        );
    }

    #[test]
    fn unsupported_orders() {
        assert!(matches!(
            Preset::DavisYin.triple(3),
            Err(Error::UnsupportedOrder { n: 3, .. })
        ));
        assert!(Preset::BiparallelLimit.triple(2).is_err());
        assert!(Preset::Ring.triple(2).is_err());
        assert!(Preset::FourOperator { p3: 1 }.triple(4).is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn triple_rejects_non_subgraph() {
        let g = AlgorithmicGraph::sequential(3).unwrap();
        let gp = AlgorithmicGraph::complete(3).unwrap();
        assert_eq!(
            GraphTriple::new(g.clone(), gp, g),
            Err(Error::NotASubgraph(1, 3))
        );
    }
}
