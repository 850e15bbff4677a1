//! Self-checks on randomized instances: graph identities, the closed-form
//! complete-graph decomposition, reductions to classical schemes, the
//! product-space oracle, the rational-coefficient bridge, monotonicity of the
//! lifted operator, convergence with zero certificates and a 1-D KKT problem.
//!
//! Every check returns its measurements together with the bound each one has
//! to meet, so callers can print a table or assert on it.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{dvector, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bench::generate_problem;
use crate::complete_fb::{
    coefficients, run_complete, step_complete, validate_complete, CompleteConfig, CompleteState,
};
use crate::error::Result;
use crate::graph::{
    complete_onto_decomposition, onto_decomposition, structure_matrices, AlgorithmicGraph, Preset,
};
use crate::operators::{
    BoxNormalCone, Forward, ProblemInstance, QuadraticGradient, Resolvent, Vector, ZeroForward,
    ZeroOperator,
};
use crate::oracle::{build_bundle, check_zero, monotonicity_sample, noncocoercivity_witness, rppa_iterate};
use crate::sampling::{random_connected_graph, random_instance, random_start, uniform_vector};
use crate::solver::{
    consensus_spread, reduction_check, run, step, validate_config, RunResult, SolverConfig,
    SolverState, StopRule,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Below,
    AtMost,
    AtLeast,
    Equal,
}

impl Bound {
    pub fn holds(self, value: f64, limit: f64) -> bool {
        match self {
            Bound::Below => value < limit,
            Bound::AtMost => value <= limit,
            Bound::AtLeast => value >= limit,
            Bound::Equal => value == limit,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Bound::Below => "<",
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
            Bound::Equal => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
}

impl Measurement {
    pub fn new(label: impl Into<String>, value: f64, bound: Bound, limit: f64) -> Self {
        Self {
            label: label.into(),
            value,
            bound,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        self.bound.holds(self.value, self.limit)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measurements: Vec<Measurement>,
    pub elapsed: Duration,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measurements.iter().all(Measurement::passed)
    }

    /// The failing measurements, or all of them when none fail.
    pub fn summary(&self) -> String {
        let failing: Vec<&Measurement> = self.measurements.iter().filter(|m| !m.passed()).collect();
        let shown: Vec<&Measurement> = if failing.is_empty() {
            self.measurements.iter().collect()
        } else {
            failing
        };
        shown
            .iter()
            .map(|m| format!("{} = {:.3e} {} {:.0e}", m.label, m.value, m.bound.symbol(), m.limit))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Sizes of the randomized checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub random_graphs: usize,
    pub max_graph_order: usize,
    pub closed_form_max_n: usize,
    pub reduction_trials: usize,
    pub reduction_iterations: usize,
    pub oracle_seeds: usize,
    pub oracle_iterations: usize,
    pub bridge_max_n: usize,
    pub bridge_iterations: usize,
    pub monotone_pairs: usize,
    pub instances: usize,
    pub instance_dim: usize,
}

impl SuiteConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            seed,
            random_graphs: 100,
            max_graph_order: 20,
            closed_form_max_n: 100,
            reduction_trials: 20,
            reduction_iterations: 20,
            oracle_seeds: 10,
            oracle_iterations: 50,
            bridge_max_n: 8,
            bridge_iterations: 50,
            monotone_pairs: 1000,
            instances: 50,
            instance_dim: 20,
        }
    }

    /// A few seconds in an unoptimized build.
    pub fn quick(seed: u64) -> Self {
        Self {
            random_graphs: 20,
            reduction_trials: 5,
            oracle_seeds: 2,
            oracle_iterations: 20,
            bridge_max_n: 5,
            bridge_iterations: 20,
            monotone_pairs: 200,
            instances: 6,
            instance_dim: 5,
            ..Self::standard(seed)
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<Vec<Measurement>>) -> Result<Check> {
    let start = Instant::now();
    let measurements = f()?;
    Ok(Check {
        name,
        measurements,
        elapsed: start.elapsed(),
    })
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count()
}

#[derive(Default)]
struct GraphDeviations {
    incidence: f64,
    symmetric_part: f64,
    onto: f64,
    column_sums: f64,
    rank_defect: f64,
}

impl GraphDeviations {
    fn laplacian(&mut self, g: &AlgorithmicGraph) {
        let m = structure_matrices(g);
        let inc = &m.incidence * m.incidence.transpose();
        self.incidence = self.incidence.max(max_abs(&(&m.laplacian - inc)));
        let sym = (&m.p + m.p.transpose()) / 2.0;
        self.symmetric_part = self.symmetric_part.max(max_abs(&(&m.laplacian - sym)));
    }

    fn decomposition(&mut self, z: &DMatrix<f64>, sub: &AlgorithmicGraph) {
        let n = sub.order();
        let lap = structure_matrices(sub).laplacian;
        self.onto = self.onto.max(max_abs(&(z * z.transpose() - lap)));
        let sums = z.row_sum();
        self.column_sums = self.column_sums.max(sums.amax());
        let defect = (numerical_rank(z) as f64 - (n - 1) as f64).abs();
        self.rank_defect = self.rank_defect.max(defect);
    }
}

/// `Lap = Inc Inc^T` and `Lap = (P + P^T)/2` exactly; `Z Z^T = Lap(G')`,
/// `Z^T 1 = 0` and `rank Z = n - 1` for every benchmark preset and for random
/// connected graphs.
pub fn graph_identities(cfg: &SuiteConfig) -> Result<Check> {
    timed("graph identities", || {
        let mut dev = GraphDeviations::default();
        for kind in Preset::BENCHMARK {
            for n in 2..=cfg.max_graph_order {
                if !kind.supports(n) {
                    continue;
                }
                let t = kind.triple(n)?;
                for g in [t.graph(), t.laplacian_subgraph(), t.forward_subgraph()] {
                    dev.laplacian(g);
                }
                dev.decomposition(t.onto(), t.laplacian_subgraph());
            }
        }
        let mut rng = cfg.rng(1);
        for _ in 0..cfg.random_graphs {
            let n = rng.random_range(2..=cfg.max_graph_order);
            let g = random_connected_graph(&mut rng, n);
            dev.laplacian(&g);
            dev.decomposition(&onto_decomposition(&g)?, &g);
        }
        Ok(vec![
            Measurement::new("|Lap - Inc Inc^T|", dev.incidence, Bound::Equal, 0.0),
            Measurement::new("|Lap - (P + P^T)/2|", dev.symmetric_part, Bound::Equal, 0.0),
            Measurement::new("|Z Z^T - Lap(G')|", dev.onto, Bound::AtMost, 1e-10),
            Measurement::new("|Z^T 1|", dev.column_sums, Bound::AtMost, 1e-10),
            Measurement::new("|rank Z - (n - 1)|", dev.rank_defect, Bound::Equal, 0.0),
        ])
    })
}

/// `a_i^2 = t_i^2 + a_{i+1}^2`, `a_{n-1} = -t_{n-1} = sqrt(n/2)`, and rows of
/// the closed-form `Z` with squared norm `n - 1` and pairwise inner product `-1`.
pub fn closed_form(cfg: &SuiteConfig) -> Result<Check> {
    timed("closed-form complete decomposition", || {
        let mut recursion = 0.0f64;
        let mut last = 0.0f64;
        let mut rows = 0.0f64;
        for n in 2..=cfg.closed_form_max_n {
            let c = coefficients(n)?;
            for i in 0..n - 2 {
                let gap = c.a[i] * c.a[i] - c.t[i] * c.t[i] - c.a[i + 1] * c.a[i + 1];
                recursion = recursion.max(gap.abs());
            }
            let half = (n as f64 / 2.0).sqrt();
            last = last.max((c.a[n - 2] - half).abs()).max((c.t[n - 2] + half).abs());
            let z = complete_onto_decomposition(n);
            let gram = &z * z.transpose();
            for i in 0..n {
                for j in 0..n {
                    let expected = if i == j { (n - 1) as f64 } else { -1.0 };
                    rows = rows.max((gram[(i, j)] - expected).abs());
                }
            }
        }
        Ok(vec![
            Measurement::new("|a_i^2 - t_i^2 - a_(i+1)^2|", recursion, Bound::AtMost, 1e-12),
            Measurement::new("|a_(n-1) - sqrt(n/2)|, |t_(n-1) + sqrt(n/2)|", last, Bound::AtMost, 1e-12),
            Measurement::new("row norms and inner products", rows, Bound::AtMost, 1e-10),
        ])
    })
}

/// The presets checked against hand-written classical iterations, with the
/// order each one runs at.
pub const REDUCTIONS: [(Preset, usize); 7] = [
    (Preset::DavisYin, 2),
    (Preset::Sequential, 4),
    (Preset::Parallel, 4),
    (Preset::Ring, 4),
    (Preset::FourOperator { p3: 1 }, 3),
    (Preset::FourOperator { p3: 2 }, 3),
    (Preset::BiparallelLimit, 4),
];

pub fn reductions(cfg: &SuiteConfig) -> Result<Check> {
    timed("reductions to classical schemes", || {
        let mut out = Vec::new();
        for (i, (kind, n)) in REDUCTIONS.into_iter().enumerate() {
            let mut worst = 0.0f64;
            for dim in [1, 5] {
                let r = reduction_check(
                    kind,
                    n,
                    dim,
                    cfg.reduction_trials,
                    cfg.reduction_iterations,
                    cfg.seed.wrapping_add(1000 * i as u64 + dim as u64),
                )?;
                worst = worst.max(r.max_deviation);
            }
            out.push(Measurement::new(kind.name(), worst, Bound::AtMost, 1e-12));
        }
        Ok(out)
    })
}

/// A random stepsize in `(0, 4 beta)` and relaxation in `(0, bound]`.
fn random_parameters<R: Rng + ?Sized>(rng: &mut R, beta: f64) -> (f64, f64) {
    let gamma = rng.random_range(0.1..3.9) * beta;
    let theta = rng.random_range(0.1..=1.0) * (4.0 * beta - gamma) / (2.0 * beta);
    (gamma, theta)
}

/// The generic iteration against the reduced proximal point iteration under
/// `w = (gamma/tau) y`, `mu = (4 beta/(4 beta - gamma)) theta`.
pub fn oracle_equivalence(cfg: &SuiteConfig) -> Result<Check> {
    timed("product-space oracle equivalence", || {
        let mut worst_x = 0.0f64;
        let mut worst_w = 0.0f64;
        for s in 0..cfg.oracle_seeds {
            let mut rng = cfg.rng(100 + s as u64);
            for kind in Preset::ALL {
                for n in 2..=6 {
                    if !kind.supports(n) {
                        continue;
                    }
                    for dim in [1, 5] {
                        let prob = random_instance(&mut rng, dim, n);
                        let beta = prob.beta();
                        let (gamma, theta) = random_parameters(&mut rng, beta);
                        let triple = kind.triple(n)?;
                        let bundle = build_bundle(&prob, &triple, gamma)?;
                        let checked = validate_config(&SolverConfig::new(gamma, theta), beta)?;
                        let mu = 4.0 * beta / (4.0 * beta - gamma) * theta;
                        let w0 = random_start(&mut rng, dim, n);
                        let mut y: Vec<Vector> = w0.iter().map(|w| w * (bundle.tau / gamma)).collect();
                        let mut state = SolverState::new(w0, n, dim)?;
                        for _ in 0..cfg.oracle_iterations {
                            state = step(&state, &prob, &triple, &checked)?;
                            let (next, inner) = rppa_iterate(&bundle, &y, mu);
                            y = next;
                            for (a, b) in state.x.iter().zip(&inner.x) {
                                worst_x = worst_x.max((a - b).amax());
                            }
                            for (w, y) in state.w.iter().zip(&y) {
                                worst_w = worst_w.max((w - y * (gamma / bundle.tau)).amax());
                            }
                        }
                    }
                }
            }
        }
        Ok(vec![
            Measurement::new("resolvent variables", worst_x, Bound::AtMost, 1e-10),
            Measurement::new("governing variables", worst_w, Bound::AtMost, 1e-10),
        ])
    })
}

/// The rational-coefficient iteration against the generic one on the complete
/// triples under `u_j = a_j w_j/(n - 1)`.
pub fn complete_bridge(cfg: &SuiteConfig) -> Result<Check> {
    timed("complete-graph bridge", || {
        let mut rng = cfg.rng(2);
        let mut worst_x = 0.0f64;
        let mut worst_u = 0.0f64;
        for n in 2..=cfg.bridge_max_n {
            for kind in [Preset::CompleteSeq, Preset::CompletePar] {
                let dim = 3;
                let triple = kind.triple(n)?;
                let prob = random_instance(&mut rng, dim, n);
                let beta = prob.beta();
                let (gamma, theta) = random_parameters(&mut rng, beta);
                let generic = validate_config(&SolverConfig::new(gamma, theta), beta)?;
                let complete = validate_complete(&CompleteConfig::from_generic(gamma, &theta.into(), n), beta, n)?;
                let coeffs = coefficients(n)?;
                let w0 = random_start(&mut rng, dim, n);
                let mut gs = SolverState::new(w0.clone(), n, dim)?;
                let mut cs = CompleteState::new(coeffs.u_from_w(&w0), n, dim)?;
                for _ in 0..cfg.bridge_iterations {
                    gs = step(&gs, &prob, &triple, &generic)?;
                    cs = step_complete(&cs, &prob, triple.predecessors(), &complete)?;
                    for (a, b) in gs.x.iter().zip(&cs.x) {
                        worst_x = worst_x.max((a - b).amax());
                    }
                    for (a, b) in coeffs.u_from_w(&gs.w).iter().zip(&cs.u) {
                        worst_u = worst_u.max((a - b).amax());
                    }
                }
            }
        }
        Ok(vec![
            Measurement::new("resolvent variables", worst_x, Bound::AtMost, 1e-10),
            Measurement::new("governing variables", worst_u, Bound::AtMost, 1e-10),
        ])
    })
}

/// Smallest monotonicity slack of the lifted forward operator over random
/// pairs, per preset and order, and the exact non-cocoercivity witness.
pub fn monotonicity(cfg: &SuiteConfig) -> Result<Check> {
    timed("monotonicity of the lifted forward operator", || {
        let mut rng = cfg.rng(3);
        let mut min_slack = f64::INFINITY;
        for kind in Preset::ALL {
            for n in 2..=5 {
                if !kind.supports(n) {
                    continue;
                }
                let prob = random_instance(&mut rng, 3, n);
                let (gamma, _) = random_parameters(&mut rng, prob.beta());
                let bundle = build_bundle(&prob, &kind.triple(n)?, gamma)?;
                let report = monotonicity_sample(&bundle, cfg.monotone_pairs, &mut rng);
                min_slack = min_slack.min(report.min_slack);
            }
        }
        let x = uniform_vector(&mut rng, 4, 3.0);
        let w = noncocoercivity_witness(&x)?;
        Ok(vec![
            Measurement::new("min slack", min_slack, Bound::AtLeast, -1e-9),
            Measurement::new("witness |inner product|", w.inner.abs(), Bound::Equal, 0.0),
            Measurement::new(
                "witness |norm^2 - 2 |x|^2|",
                (w.norm_sq - w.expected_norm_sq).abs(),
                Bound::Equal,
                0.0,
            ),
        ])
    })
}

/// Parameters of [`solve_preset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetRun {
    pub gamma: f64,
    pub theta: f64,
    pub stop: StopRule,
    pub tol: f64,
    /// Route complete presets through the rational-coefficient iteration.
    pub rational: bool,
}

/// Runs `kind` on `prob` from `w0`.
pub fn solve_preset(kind: Preset, prob: &ProblemInstance, w0: &[Vector], p: PresetRun) -> Result<RunResult> {
    let n = prob.order();
    let beta = prob.beta();
    let triple = kind.triple(n)?;
    if p.rational && kind.is_complete() {
        let cfg = CompleteConfig::from_generic(p.gamma, &p.theta.into(), n)
            .with_tol(p.tol)
            .with_stop(p.stop);
        let cfg = validate_complete(&cfg, beta, n)?;
        run_complete(prob, triple.predecessors(), &cfg, coefficients(n)?.u_from_w(w0))
    } else {
        let cfg = SolverConfig::new(p.gamma, p.theta).with_tol(p.tol).with_stop(p.stop);
        run(prob, &triple, &validate_config(&cfg, beta)?, w0.to_vec())
    }
}

/// The benchmark methods on generated ball instances with `n` cycling through
/// `3, 4, 5`: residual, consensus, zero certificate and feasibility. Runs use
/// the guarded rule; the successive rule alone leaves a consensus gap of
/// roughly `tol / (1 - rate)` on slowly contracting tree triples.
pub fn convergence(cfg: &SuiteConfig) -> Result<Check> {
    timed("convergence and zero certificate", || {
        let tol = 1e-8;
        let mut worst_residual = 0.0f64;
        let mut failures = 0usize;
        let mut spread = 0.0f64;
        let mut certificate = 0.0f64;
        let mut infeasibility = 0.0f64;
        for i in 0..cfg.instances {
            let n = 3 + i % 3;
            let mut rng = cfg.rng(1000 + i as u64);
            let gen = generate_problem(cfg.instance_dim, n, 1, &mut rng)?;
            let prob = gen.instance()?;
            let gamma = 2.0 * prob.beta();
            let w0 = vec![gen.w0[0].clone(); n - 1];
            for kind in Preset::BENCHMARK {
                let params = PresetRun {
                    gamma,
                    theta: 0.99,
                    stop: StopRule::Guarded,
                    tol,
                    rational: true,
                };
                let r = solve_preset(kind, &prob, &w0, params)?;
                if !r.converged {
                    failures += 1;
                }
                worst_residual = worst_residual.max(r.final_residual);
                spread = spread.max(consensus_spread(&r.x));
                let z = check_zero(&r.x_star, &prob, gamma, Some(&r.probes), 1e-6);
                certificate = certificate.max(z.certificate_norm);
                for (c, &radius) in gen.centers.iter().zip(&gen.radii) {
                    infeasibility = infeasibility.max((&r.x_star - c).norm() - radius);
                }
            }
        }
        Ok(vec![
            Measurement::new("runs not converged", failures as f64, Bound::Equal, 0.0),
            Measurement::new("max successive residual", worst_residual, Bound::Below, tol),
            Measurement::new("consensus spread", spread, Bound::Below, 1e-7),
            Measurement::new("zero certificate", certificate, Bound::Below, 1e-6),
            Measurement::new("ball violation", infeasibility, Bound::AtMost, 1e-6),
        ])
    })
}

/// `min x^2/2` over `[-1, 1] ∩ [1/2, 2]` in one dimension, split as
/// `N_[-1,1] + N_[1/2,2] + Id` and padded with zero operators up to order `n`.
/// The solution is `1/2`.
pub fn kkt_instance(n: usize) -> Result<ProblemInstance> {
    let mut resolvents: Vec<Arc<dyn Resolvent>> = vec![
        Arc::new(BoxNormalCone::new(dvector![-1.0], dvector![1.0])?),
        Arc::new(BoxNormalCone::new(dvector![0.5], dvector![2.0])?),
    ];
    let mut forwards: Vec<Arc<dyn Forward>> = vec![Arc::new(QuadraticGradient::new(DMatrix::identity(1, 1))?)];
    for _ in 2..n {
        resolvents.push(Arc::new(ZeroOperator));
        forwards.push(Arc::new(ZeroForward));
    }
    ProblemInstance::new(1, resolvents, forwards)
}

pub const KKT_SOLUTION: f64 = 0.5;

/// Every preset admitting order 2 or 3 on [`kkt_instance`], from `w = 10`.
pub fn kkt() -> Result<Check> {
    timed("one-dimensional KKT problem", || {
        let mut out = Vec::new();
        for kind in Preset::ALL {
            for n in [2, 3] {
                if !kind.supports(n) {
                    continue;
                }
                let prob = kkt_instance(n)?;
                let gamma = 2.0 * prob.beta();
                let w0 = vec![dvector![10.0]; n - 1];
                let variants: &[bool] = if kind.is_complete() { &[false, true] } else { &[false] };
                for &rational in variants {
                    let params = PresetRun {
                        gamma,
                        theta: 0.99,
                        stop: StopRule::Guarded,
                        tol: 1e-10,
                        rational,
                    };
                    let r = solve_preset(kind, &prob, &w0, params)?;
                    let label = format!("{}{} n={n}", kind.name(), if rational { " (rational)" } else { "" });
                    let err = if r.converged { (r.x_star[0] - KKT_SOLUTION).abs() } else { f64::INFINITY };
                    out.push(Measurement::new(label, err, Bound::Below, 1e-6));
                }
            }
        }
        Ok(out)
    })
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<Check>> {
    Ok(vec![
        graph_identities(cfg)?,
        closed_form(cfg)?,
        reductions(cfg)?,
        oracle_equivalence(cfg)?,
        complete_bridge(cfg)?,
        monotonicity(cfg)?,
        convergence(cfg)?,
        kkt()?,
    ])
}

/// One line per check: status, name, elapsed time and the shown measurements.
pub fn format_table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{status}  {:<width$}  {:>8.2?}  {}",
            c.name,
            c.elapsed,
            c.summary()
        );
    }
    out
}
