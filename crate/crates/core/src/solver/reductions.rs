//! Step-for-step comparison of the generic iteration with hand-written
//! classical schemes that it specializes to.
//!
//! Each scheme below is coded directly from its textbook form, without going
//! through graphs or onto decompositions. The generic iteration runs on the
//! matching preset triple, and the report holds the largest componentwise gap
//! over all trials and iterations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{step, validate_config, SolverConfig, SolverState};
use crate::error::{Error, Result};
use crate::graph::Preset;
use crate::operators::{ProblemInstance, Vector};
use crate::sampling::{random_instance_with, random_start};

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub kind: Preset,
    pub n: usize,
    pub dim: usize,
    pub trials: usize,
    pub iterations: usize,
    pub max_deviation: f64,
}

/// Iterates of a hand-written scheme: `(x^{k+1}, w^{k+1})` per step.
type Trajectory = Vec<(Vec<Vector>, Vec<Vector>)>;

/// Runs `trials` random comparisons of `iterations` steps each in dimension `dim`.
pub fn reduction_check(
    kind: Preset,
    n: usize,
    dim: usize,
    trials: usize,
    iterations: usize,
    seed: u64,
) -> Result<ReductionReport> {
    if !kind.supports(n) {
        return Err(Error::UnsupportedOrder {
            kind: kind.name().to_string(),
            n,
        });
    }
    if matches!(kind, Preset::CompleteSeq | Preset::CompletePar) {
        // the complete presets are compared against their own rational scheme
        return Err(Error::UnsupportedOrder {
            kind: kind.name().to_string(),
            n,
        });
    }
    let triple = kind.triple(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation = 0.0f64;
    for _ in 0..trials {
        let prob = match kind {
            Preset::FourOperator { .. } => random_instance_with(&mut rng, dim, n, |j| j != 1),
            Preset::BiparallelLimit => random_instance_with(&mut rng, dim, n, |j| j == n - 1),
            _ => random_instance_with(&mut rng, dim, n, |_| true),
        };
        let beta = prob.beta();
        let w0 = random_start(&mut rng, dim, n);
        // Interior parameters; the ring comparison doubles both, so stay in the
        // lower half of the admissible ranges.
        let gamma = beta * rand::Rng::random_range(&mut rng, 0.2..1.0);
        let theta = 0.5 * ((4.0 * beta - 2.0 * gamma) / (2.0 * beta))
            * rand::Rng::random_range(&mut rng, 0.2..1.0);

        let (alg_gamma, alg_theta, alg_w0, w_scale) = match kind {
            Preset::Ring => (2.0 * gamma, 2.0 * theta, scale(&w0, 2.0), 2.0),
            _ => (gamma, theta, w0.clone(), 1.0),
        };
        let reference = match kind {
            Preset::DavisYin => davis_yin(&prob, gamma, theta, &w0, iterations),
            Preset::Sequential => sequential_fdr(&prob, gamma, theta, &w0, iterations),
            Preset::Parallel => parallel_fdr(&prob, gamma, theta, &w0, iterations),
            Preset::Ring => ring_fb(&prob, gamma, theta, &w0, iterations),
            Preset::FourOperator { p3 } => four_operator(&prob, p3, gamma, theta, &w0, iterations),
            Preset::BiparallelLimit => {
                let lambda = gamma / (n - 1) as f64;
                biparallel_limit(&prob, lambda, theta, &w0, iterations)
            }
            Preset::CompleteSeq | Preset::CompletePar => unreachable!(),
        };

        let cfg = validate_config(&SolverConfig::new(alg_gamma, alg_theta), beta)?;
        let mut state = SolverState::new(alg_w0, n, dim)?;
        for (x_ref, w_ref) in &reference {
            state = step(&state, &prob, &triple, &cfg)?;
            max_deviation = max_deviation.max(max_gap(&state.x, x_ref, 1.0));
            max_deviation = max_deviation.max(max_gap(&state.w, w_ref, w_scale));
        }
    }
    Ok(ReductionReport {
        kind,
        n,
        dim,
        trials,
        iterations,
        max_deviation,
    })
}

fn scale(v: &[Vector], factor: f64) -> Vec<Vector> {
    v.iter().map(|x| x * factor).collect()
}

/// `max |a - factor * b|` over all components.
fn max_gap(a: &[Vector], b: &[Vector], factor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(a, b)| (a - b * factor).amax())
        .fold(0.0, f64::max)
}

fn a(prob: &ProblemInstance, i: usize, sigma: f64, v: &Vector) -> Vector {
    prob.resolvent(i).resolve(sigma, v)
}

fn b(prob: &ProblemInstance, j: usize, x: &Vector) -> Vector {
    prob.forward(j).apply(x)
}

/// Three-operator splitting, `n = 2`.
fn davis_yin(prob: &ProblemInstance, gamma: f64, theta: f64, w0: &[Vector], iters: usize) -> Trajectory {
    let mut w = w0[0].clone();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let x1 = a(prob, 1, gamma, &w);
        let x2 = a(prob, 2, gamma, &(&x1 * 2.0 - &w - b(prob, 1, &x1) * gamma));
        w += (&x2 - &x1) * theta;
        out.push((vec![x1, x2], vec![w.clone()]));
    }
    out
}

/// Forward Douglas-Rachford on a chain of resolvents.
fn sequential_fdr(
    prob: &ProblemInstance,
    gamma: f64,
    theta: f64,
    w0: &[Vector],
    iters: usize,
) -> Trajectory {
    let n = prob.order();
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut x: Vec<Vector> = vec![a(prob, 1, gamma, &w[0])];
        for i in 2..n {
            let prev = &x[i - 2];
            let arg = prev - b(prob, i - 1, prev) * (gamma / 2.0) + (&w[i - 1] - &w[i - 2]) * 0.5;
            x.push(a(prob, i, gamma / 2.0, &arg));
        }
        let prev = &x[n - 2];
        let arg = prev * 2.0 - b(prob, n - 1, prev) * gamma - &w[n - 2];
        x.push(a(prob, n, gamma, &arg));
        for i in 0..n - 1 {
            w[i] += (&x[i + 1] - &x[i]) * theta;
        }
        out.push((x, w.clone()));
    }
    out
}

/// Forward Douglas-Rachford with one hub resolvent feeding all others.
fn parallel_fdr(
    prob: &ProblemInstance,
    gamma: f64,
    theta: f64,
    w0: &[Vector],
    iters: usize,
) -> Trajectory {
    let n = prob.order();
    let m = (n - 1) as f64;
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mean = w.iter().fold(Vector::zeros(prob.dim()), |acc, v| acc + v) / m;
        let x1 = a(prob, 1, gamma / m, &mean);
        let mut x = vec![x1.clone()];
        for i in 2..=n {
            let arg = &x1 * 2.0 - b(prob, i - 1, &x1) * gamma - &w[i - 2];
            x.push(a(prob, i, gamma, &arg));
        }
        for i in 0..n - 1 {
            w[i] += (&x[i + 1] - &x1) * theta;
        }
        out.push((x, w.clone()));
    }
    out
}

/// Forward-backward on a ring of resolvents.
fn ring_fb(prob: &ProblemInstance, gamma: f64, theta: f64, w0: &[Vector], iters: usize) -> Trajectory {
    let n = prob.order();
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut x: Vec<Vector> = vec![a(prob, 1, gamma, &w[0])];
        for i in 2..n {
            let prev = &x[i - 2];
            let arg = prev + &w[i - 1] - &w[i - 2] - b(prob, i - 1, prev) * gamma;
            x.push(a(prob, i, gamma, &arg));
        }
        let prev = &x[n - 2];
        let arg = &x[0] + prev - &w[n - 2] - b(prob, n - 1, prev) * gamma;
        x.push(a(prob, n, gamma, &arg));
        for i in 0..n - 1 {
            w[i] += (&x[i + 1] - &x[i]) * theta;
        }
        out.push((x, w.clone()));
    }
    out
}

/// Four-operator splitting with `B_1 = 0`, `B = B_2` evaluated at `x_{p3}`.
fn four_operator(
    prob: &ProblemInstance,
    p3: usize,
    gamma: f64,
    theta: f64,
    w0: &[Vector],
    iters: usize,
) -> Trajectory {
    let h = gamma / 2.0;
    let mut w = w0.to_vec();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let x1 = a(prob, 1, h, &(&w[0] * 0.5));
        let x2 = a(prob, 2, h, &(&x1 + &w[1] * 0.5));
        let at = if p3 == 1 { &x1 } else { &x2 };
        let arg = &x1 + &x2 - b(prob, 2, at) * h - &w[0] * 0.5 - &w[1] * 0.5;
        let x3 = a(prob, 3, h, &arg);
        w[0] += (&x3 - &x1) * theta;
        w[1] += (&x3 - &x2) * theta;
        out.push((vec![x1, x2, x3], w.clone()));
    }
    out
}

/// Hub-and-sink scheme in the variables `u = w / (n - 1)`, with only
/// `B_{n-1}` nonzero, evaluated at `x_1`. Returned `w` is `(n - 1) u`.
fn biparallel_limit(
    prob: &ProblemInstance,
    lambda: f64,
    theta: f64,
    w0: &[Vector],
    iters: usize,
) -> Trajectory {
    let n = prob.order();
    let m = (n - 1) as f64;
    let mut u: Vec<Vector> = w0.iter().map(|w| w / m).collect();
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let x1 = a(prob, 1, lambda, &u[0]);
        let mut x = vec![x1.clone()];
        for i in 2..n {
            x.push(a(prob, i, lambda * m / 2.0, &(&x1 + &u[i - 1] * (m / 2.0))));
        }
        let sum_x = x.iter().fold(Vector::zeros(prob.dim()), |acc, v| acc + v);
        let sum_u = u.iter().fold(Vector::zeros(prob.dim()), |acc, v| acc + v);
        let arg = sum_x * (2.0 / m) - b(prob, n - 1, &x1) * lambda - sum_u;
        x.push(a(prob, n, lambda, &arg));
        for i in 0..n - 1 {
            u[i] -= (&x[i] - &x[n - 1]) * (theta / m);
        }
        out.push((x, u.iter().map(|v| v * m).collect()));
    }
    out
}
