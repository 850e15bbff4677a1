use nalgebra::DMatrix;

use super::AlgorithmicGraph;

/// Dense structure matrices of an algorithmic graph. All entries are small
/// integers, stored as `f64` so they compose with the solver's linear algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub adjacency: DMatrix<f64>,
    pub degree: DMatrix<f64>,
    /// `n x E`, columns in canonical edge order.
    pub incidence: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    /// `Deg - 2 Adj^T`, lower triangular.
    pub p: DMatrix<f64>,
    /// `Adj - Adj^T`, skew-symmetric.
    pub q: DMatrix<f64>,
}

pub fn structure_matrices(g: &AlgorithmicGraph) -> GraphMatrices {
    let n = g.order();
    let mut adjacency = DMatrix::zeros(n, n);
    let mut incidence = DMatrix::zeros(n, g.edge_count());
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        adjacency[(i - 1, j - 1)] = 1.0;
        incidence[(i - 1, e)] = 1.0;
        incidence[(j - 1, e)] = -1.0;
    }
    let degree = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        g.degrees().into_iter().map(|d| d as f64),
    ));
    let laplacian = &degree - &adjacency - adjacency.transpose();
    let p = &degree - adjacency.transpose() * 2.0;
    let q = &adjacency - adjacency.transpose();
    GraphMatrices {
        adjacency,
        degree,
        incidence,
        laplacian,
        p,
        q,
    }
}
