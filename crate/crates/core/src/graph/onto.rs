use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{structure_matrices, AlgorithmicGraph};
use crate::error::Result;

/// Canonical onto decomposition `Z` (`n x (n-1)`) of `Lap(g)`, `Z Z^T = Lap(g)`.
///
/// Selection rule:
/// 1. complete graph: the lower-triangular closed form of
///    [`complete_onto_decomposition`];
/// 2. tree: the incidence matrix;
/// 3. otherwise: `Z = V diag(sqrt(lambda))` from the eigendecomposition, with
///    eigenvalues descending, each eigenvector's first nonzero entry positive,
///    and equal eigenvalues ordered lexicographically by eigenvector.
pub fn onto_decomposition(g: &AlgorithmicGraph) -> Result<DMatrix<f64>> {
    g.require_connected()?;
    if g.is_complete() {
        return Ok(complete_onto_decomposition(g.order()));
    }
    if g.is_tree() {
        return Ok(structure_matrices(g).incidence);
    }
    Ok(spectral_onto(&structure_matrices(g).laplacian))
}

/// Closed-form onto decomposition of the complete-graph Laplacian:
/// `Z_ii = a_i`, `Z_ij = t_j` for `i > j`, zero above the diagonal, with
/// `a_i = sqrt((n-i) n / (n-i+1))` and `t_i = -sqrt(n / ((n-i)(n-i+1)))`.
pub fn complete_onto_decomposition(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n - 1, |r, c| {
        let (i, j) = (r + 1, c + 1);
        match i.cmp(&j) {
            Ordering::Equal => {
                let m = (n - i) as f64;
                (m * nf / (m + 1.0)).sqrt()
            }
            Ordering::Greater => {
                let m = (n - j) as f64;
                -(nf / (m * (m + 1.0))).sqrt()
            }
            Ordering::Less => 0.0,
        }
    })
}

fn spectral_onto(laplacian: &DMatrix<f64>) -> DMatrix<f64> {
    let n = laplacian.nrows();
    let eig = SymmetricEigen::new(laplacian.clone());
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
                if first < 0.0 {
                    v.neg_mut();
                }
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        let tie = 1e-9 * (1.0 + a.0.abs().max(b.0.abs()));
        if (a.0 - b.0).abs() <= tie {
            lexicographic(&a.1, &b.1)
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    let mut z = DMatrix::zeros(n, n - 1);
    for (c, (lambda, v)) in pairs.iter().take(n - 1).enumerate() {
        z.set_column(c, &(v * lambda.max(0.0).sqrt()));
    }
    z
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Second-smallest eigenvalue of `Lap(g)`.
pub fn algebraic_connectivity(g: &AlgorithmicGraph) -> Result<f64> {
    g.require_connected()?;
    let lap = structure_matrices(g).laplacian;
    let mut ev: Vec<f64> = SymmetricEigen::new(lap).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_abs_diff_eq;

    fn check_onto(g: &AlgorithmicGraph, z: &DMatrix<f64>) {
        let n = g.order();
        assert_eq!(z.shape(), (n, n - 1));
        let lap = structure_matrices(g).laplacian;
        assert_abs_diff_eq!(z * z.transpose(), lap, epsilon = 1e-10);
        let ones = DVector::from_element(n, 1.0);
        assert_abs_diff_eq!(z.transpose() * ones, DVector::zeros(n - 1), epsilon = 1e-10);
        let sv = z.clone().singular_values();
        assert!(sv.min() > 1e-8);
    }

    #[test]
    fn complete_two() {
        let z = onto_decomposition(&AlgorithmicGraph::complete(2).unwrap()).unwrap();
        assert_eq!(z, DMatrix::from_column_slice(2, 1, &[1.0, -1.0]));
    }

    #[test]
    fn complete_five_last_column() {
        let z = complete_onto_decomposition(5);
        let r = (2.5f64).sqrt();
        assert_abs_diff_eq!(z[(3, 3)], r, epsilon = 1e-15);
        assert_abs_diff_eq!(z[(4, 3)], -r, epsilon = 1e-15);
        check_onto(&AlgorithmicGraph::complete(5).unwrap(), &z);
    }

    #[test]
    fn closed_form_is_lower_triangular_with_positive_diagonal() {
        for n in 2..30 {
            let z = complete_onto_decomposition(n);
            for i in 0..n {
                for j in 0..n - 1 {
                    if j > i {
                        assert_eq!(z[(i, j)], 0.0);
                    }
                    if j == i {
                        assert!(z[(i, j)] > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn tree_uses_incidence() {
        let g = AlgorithmicGraph::sequential(4).unwrap();
        let z = onto_decomposition(&g).unwrap();
        assert_eq!(z, structure_matrices(&g).incidence);
        check_onto(&g, &z);
    }

    #[test]
    fn spectral_for_ring_and_biparallel() {
        for g in [
            AlgorithmicGraph::ring(6).unwrap(),
            AlgorithmicGraph::biparallel(5).unwrap(),
        ] {
            let z = onto_decomposition(&g).unwrap();
            check_onto(&g, &z);
            // deterministic across calls
            assert_eq!(z, onto_decomposition(&g).unwrap());
        }
    }

    #[test]
    fn disconnected_is_rejected() {
        let g = AlgorithmicGraph::new(4, [(1, 2), (3, 4)]).unwrap();
        assert_eq!(onto_decomposition(&g), Err(Error::NotConnected { n: 4 }));
        assert_eq!(algebraic_connectivity(&g), Err(Error::NotConnected { n: 4 }));
    }

    #[test]
    fn connectivity_values() {
        let k5 = AlgorithmicGraph::complete(5).unwrap();
        assert_abs_diff_eq!(algebraic_connectivity(&k5).unwrap(), 5.0, epsilon = 1e-9);
        let par = AlgorithmicGraph::parallel_up(5).unwrap();
        assert_abs_diff_eq!(algebraic_connectivity(&par).unwrap(), 1.0, epsilon = 1e-9);
        let seq = AlgorithmicGraph::sequential(4).unwrap();
        let expected = 2.0 * (1.0 - (std::f64::consts::PI / 4.0).cos());
        assert_abs_diff_eq!(algebraic_connectivity(&seq).unwrap(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(expected, 0.585786, epsilon = 1e-6);
    }
}
