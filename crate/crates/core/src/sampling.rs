//! Random operator instances for equivalence and invariant checks.
//!
//! The instances mix every resolvent kind of [`crate::operators`] and use
//! quadratic gradients for the forward part, so trajectories exercise
//! projections, linear solves and nonzero forward terms.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::graph::AlgorithmicGraph;
use crate::operators::{
    BallNormalCone, BoxNormalCone, Forward, LinearMonotone, ProblemInstance, QuadraticGradient,
    Resolvent, Vector, ZeroForward, ZeroOperator,
};

/// Uniform vector in `[-scale, scale]^dim`.
pub fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-scale..=scale))
}

/// `W^T W / dim` with `W` uniform in `[-1, 1]`, a random PSD matrix of unit scale.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let w = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..=1.0));
    w.transpose() * w / dim as f64
}

pub fn random_resolvent<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Arc<dyn Resolvent> {
    match rng.random_range(0..4) {
        0 => Arc::new(ZeroOperator),
        1 => {
            let center = uniform_vector(rng, dim, 2.0);
            Arc::new(BallNormalCone::new(center, rng.random_range(0.5..2.0)).expect("radius > 0"))
        }
        2 => {
            let lo = uniform_vector(rng, dim, 1.0).map(|v| v - 1.0);
            let hi = &lo + Vector::from_fn(dim, |_, _| rng.random_range(0.5..2.0));
            Arc::new(BoxNormalCone::new(lo, hi).expect("lo <= hi"))
        }
        _ => Arc::new(LinearMonotone::new(random_psd(rng, dim)).expect("square matrix")),
    }
}

pub fn random_forward<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Arc<dyn Forward> {
    let q = random_psd(rng, dim);
    match QuadraticGradient::new(q) {
        Ok(f) => Arc::new(f),
        Err(_) => Arc::new(ZeroForward),
    }
}

/// `n` random resolvents and `n - 1` random quadratic forwards.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize) -> ProblemInstance {
    random_instance_with(rng, dim, n, |_| true)
}

/// As [`random_instance`], but `B_j` is zero whenever `keep(j)` is false.
pub fn random_instance_with<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    n: usize,
    keep: impl Fn(usize) -> bool,
) -> ProblemInstance {
    let resolvents = (0..n).map(|_| random_resolvent(rng, dim)).collect();
    let forwards = (1..n)
        .map(|j| {
            if keep(j) {
                random_forward(rng, dim)
            } else {
                Arc::new(ZeroForward) as Arc<dyn Forward>
            }
        })
        .collect();
    ProblemInstance::new(dim, resolvents, forwards).expect("consistent random instance")
}

/// `n - 1` independent starting vectors in `[-5, 5]^dim`.
pub fn random_start<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize) -> Vec<Vector> {
    (1..n).map(|_| uniform_vector(rng, dim, 5.0)).collect()
}

/// Connected algorithmic graph on `n` nodes: a random spanning tree with
/// forward edges plus each remaining forward edge with a random probability.
pub fn random_connected_graph<R: Rng + ?Sized>(rng: &mut R, n: usize) -> AlgorithmicGraph {
    let mut edges = BTreeSet::new();
    for j in 2..=n {
        edges.insert((rng.random_range(1..j), j));
    }
    let density = rng.random_range(0.0..0.6);
    for i in 1..n {
        for j in i + 1..=n {
            if rng.random_bool(density) {
                edges.insert((i, j));
            }
        }
    }
    AlgorithmicGraph::connected(n, edges).expect("spanning tree keeps the graph connected")
}
