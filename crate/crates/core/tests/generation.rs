use graphfb::bench::{experiment_problem, generate_problem, ExperimentSpec};
use graphfb::operators::Resolvent;
use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const INSTANCES: usize = 1000;

#[test]
fn generated_instances_satisfy_the_construction_invariants() {
    for dim in [5, 50, 200] {
        let mut rng = ChaCha8Rng::seed_from_u64(dim as u64);
        let count = if dim == 200 { INSTANCES / 10 } else { INSTANCES };
        for k in 0..count {
            let n = 2 + k % 5;
            let p = generate_problem(dim, n, 3, &mut rng).unwrap();
            let zn = p.z.norm();
            assert!(p.z.iter().all(|v| v.abs() <= 10.0));
            for i in 0..n {
                let c = &p.centers[i];
                let dist = (&p.z - c).norm();
                assert!(dist >= zn / 6.0 * (1.0 - 1e-12) && dist <= zn / 3.0 * (1.0 + 1e-12));
                let eps = p.radii[i] - dist;
                assert!(eps > 0.0 && eps < zn / 6.0 * (1.0 + 1e-12), "eps {eps}");
                assert!(c.norm() > p.radii[i], "origin inside ball {i}");
                for w in &p.w0 {
                    assert!((w - c).norm() > p.radii[i], "start inside ball {i}");
                }
            }
            let ball = p.instance().unwrap();
            for i in 1..=n {
                // z is feasible: projecting it onto every ball leaves it fixed
                let proj = ball.resolvent(i).resolve(1.0, &p.z);
                assert!((&proj - &p.z).amax() <= 1e-12);
            }
            for (j, q) in p.q.iter().enumerate() {
                assert_eq!(q, &q.transpose());
                // eigen-decompositions are costly at dim 200, so check a subset
                if k % 10 == 0 {
                    let eig = SymmetricEigen::new(q.clone()).eigenvalues;
                    let max = eig.max();
                    assert!(eig.min() >= -1e-10 * max);
                    assert!((p.betas[j] * max - 1.0).abs() <= 1e-8, "beta_{j}: dim={dim} {}", p.betas[j] * max - 1.0);
                }
            }
            let min = p.betas.iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(p.beta, min);
        }
    }
}

fn feasible<R: Resolvent + ?Sized>(op: &R, x: &nalgebra::DVector<f64>) -> bool {
    (op.resolve(1.0, x) - x).amax() <= 1e-12
}

#[test]
fn instances_are_deterministic_and_order_independent() {
    let spec = ExperimentSpec::fast(9);
    let later = experiment_problem(&spec, 5, 3).unwrap();
    let _ = experiment_problem(&spec, 4, 0).unwrap();
    assert_eq!(experiment_problem(&spec, 5, 3).unwrap(), later);
    assert_ne!(experiment_problem(&spec, 5, 2).unwrap(), later);
    let other = ExperimentSpec::fast(10);
    assert_ne!(experiment_problem(&other, 5, 3).unwrap(), later);
    let inst = later.instance().unwrap();
    assert!((1..=5).all(|i| feasible(inst.resolvent(i), &later.z)));
}

#[test]
fn degenerate_requests_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(generate_problem(1, 3, 1, &mut rng).is_err());
    assert!(generate_problem(5, 1, 1, &mut rng).is_err());
}
