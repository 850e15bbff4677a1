use std::collections::BTreeSet;

use graphfb::graph::{complete_onto_decomposition, onto_decomposition, structure_matrices};
use graphfb::{AlgorithmicGraph, Preset};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// A spanning tree with forward edges (node j hangs off some i < j) plus extra
/// forward edges chosen by the mask.
fn connected_graph() -> impl Strategy<Value = AlgorithmicGraph> {
    (2usize..=20)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (2..=n).map(|j| 1..j).collect();
            (Just(n), parents, proptest::collection::vec(any::<bool>(), n * (n - 1) / 2))
        })
        .prop_map(|(n, parents, mask)| {
            let mut edges: BTreeSet<(usize, usize)> =
                parents.into_iter().enumerate().map(|(k, p)| (p, k + 2)).collect();
            let pairs = (1..n).flat_map(|i| (i + 1..=n).map(move |j| (i, j)));
            for (pair, keep) in pairs.zip(mask) {
                // sparse on average
                if keep && (pair.0 + pair.1) % 3 == 0 {
                    edges.insert(pair);
                }
            }
            AlgorithmicGraph::connected(n, edges).unwrap()
        })
}

fn smallest_singular_ratio(z: &DMatrix<f64>) -> f64 {
    let sv = z.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    min / max
}

fn check_decomposition(z: &DMatrix<f64>, g: &AlgorithmicGraph) -> Result<(), TestCaseError> {
    let n = g.order();
    prop_assert_eq!(z.shape(), (n, n - 1));
    let lap = structure_matrices(g).laplacian;
    prop_assert!((z * z.transpose() - lap).amax() <= 1e-10);
    prop_assert!(z.row_sum().amax() <= 1e-10);
    prop_assert!(smallest_singular_ratio(z) > 1e-8);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn laplacian_identities_are_exact(g in connected_graph()) {
        let m = structure_matrices(&g);
        prop_assert_eq!(&m.laplacian, &(&m.incidence * m.incidence.transpose()));
        prop_assert_eq!(&m.laplacian, &((&m.p + m.p.transpose()) / 2.0));
        prop_assert_eq!(&m.q, &(-m.q.transpose()));
    }

    #[test]
    fn onto_decomposition_of_random_graphs(g in connected_graph()) {
        check_decomposition(&onto_decomposition(&g).unwrap(), &g)?;
    }

    #[test]
    fn closed_form_is_lower_triangular_with_positive_diagonal(n in 2usize..=100) {
        let z = complete_onto_decomposition(n);
        for i in 0..n {
            for j in 0..n - 1 {
                if j > i {
                    prop_assert_eq!(z[(i, j)], 0.0);
                } else if j == i {
                    prop_assert!(z[(i, j)] > 0.0);
                }
            }
        }
        let gram = &z * z.transpose();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { (n - 1) as f64 } else { -1.0 };
                prop_assert!((gram[(i, j)] - expected).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn presets_decompose_their_laplacian_subgraph() {
    for kind in Preset::ALL {
        for n in 2..=20 {
            if !kind.supports(n) {
                continue;
            }
            let t = kind.triple(n).unwrap();
            check_decomposition(t.onto(), t.laplacian_subgraph()).unwrap();
            for g in [t.graph(), t.laplacian_subgraph(), t.forward_subgraph()] {
                let m = structure_matrices(g);
                assert_eq!(m.laplacian, &m.incidence * m.incidence.transpose());
            }
        }
    }
}
