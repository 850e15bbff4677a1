//! Random ball-constrained quadratic problems and the method comparison.
//!
//! Each instance asks for a zero of `sum_i N_{C_i} + sum_j Q_j`, i.e. it
//! minimizes `sum_j x^T Q_j x / 2` over the intersection of `n` balls `C_i`
//! that share an interior point `z` and exclude the origin.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complete_fb::{coefficients, run_complete, validate_complete, CompleteConfig};
use crate::error::{Error, Result};
use crate::graph::{algebraic_connectivity, Preset};
use crate::operators::{
    estimate_cocoercivity, BallNormalCone, Forward, ProblemInstance, QuadraticGradient, Resolvent,
    Vector,
};
use crate::solver::{run, validate_config, Relaxation, RunResult, SolverConfig, StopRule};

/// Attempts before [`generate_problem`] gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub dim: usize,
    pub n_range: Vec<usize>,
    pub problems_per_n: usize,
    pub starts_per_problem: usize,
    pub methods: Vec<Preset>,
    pub tol: f64,
    /// `gamma = gamma_factor * beta`.
    pub gamma_factor: f64,
    pub theta: f64,
    pub max_iters: usize,
    pub stop: StopRule,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Dimension 200, three to twenty operators, 10 problems with 10 starts each.
    pub fn full(seed: u64) -> Self {
        Self {
            dim: 200,
            n_range: (3..=20).collect(),
            problems_per_n: 10,
            starts_per_problem: 10,
            methods: Preset::BENCHMARK.to_vec(),
            tol: 1e-8,
            gamma_factor: 2.0,
            theta: 0.99,
            max_iters: 200_000,
            stop: StopRule::Successive,
            seed,
        }
    }

    /// Dimension 50 and at most six operators.
    pub fn fast(seed: u64) -> Self {
        Self {
            dim: 50,
            n_range: (3..=6).collect(),
            ..Self::full(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::Parse(format!("experiment: {msg}")));
        if self.dim < 2 {
            return invalid("dim must be at least 2");
        }
        if self.n_range.is_empty() || self.n_range.iter().any(|&n| n < 2) {
            return invalid("every n must be at least 2");
        }
        if self.problems_per_n == 0 || self.starts_per_problem == 0 || self.max_iters == 0 {
            return invalid("counts must be positive");
        }
        if self.methods.is_empty() {
            return invalid("at least one method is required");
        }
        if !(self.tol > 0.0) {
            return invalid("tol must be positive");
        }
        for &m in &self.methods {
            for &n in &self.n_range {
                if !m.supports(n) {
                    return Err(Error::UnsupportedOrder {
                        kind: m.name().to_string(),
                        n,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One instance with its starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedProblem {
    pub z: Vector,
    pub centers: Vec<Vector>,
    pub radii: Vec<f64>,
    /// `r_i - ||z - c_i||`.
    pub margins: Vec<f64>,
    pub q: Vec<DMatrix<f64>>,
    /// `1 / ||Q_j||_2` per forward operator.
    pub betas: Vec<f64>,
    pub beta: f64,
    pub w0: Vec<Vector>,
}

impl GeneratedProblem {
    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn order(&self) -> usize {
        self.centers.len()
    }

    /// `N_{C_1}, .., N_{C_n}` and `Q_1, .., Q_{n-1}`.
    pub fn instance(&self) -> Result<ProblemInstance> {
        let resolvents = self
            .centers
            .iter()
            .zip(&self.radii)
            .map(|(c, &r)| Ok(Arc::new(BallNormalCone::new(c.clone(), r)?) as Arc<dyn Resolvent>))
            .collect::<Result<_>>()?;
        let forwards = self
            .q
            .iter()
            .zip(&self.betas)
            .map(|(q, &b)| Ok(Arc::new(QuadraticGradient::with_beta(q.clone(), b)?) as Arc<dyn Forward>))
            .collect::<Result<_>>()?;
        ProblemInstance::new(self.dim(), resolvents, forwards)?.with_beta(self.beta)
    }

    /// Checks the construction guarantees; returns the first violated one.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let zn = self.z.norm();
        for (i, (c, &r)) in self.centers.iter().zip(&self.radii).enumerate() {
            let dist = (&self.z - c).norm();
            if !(dist >= zn / 6.0 * (1.0 - 1e-12) && dist <= zn / 3.0 * (1.0 + 1e-12)) {
                return Err(format!("center {i}: ||z - c|| = {dist} outside [{}, {}]", zn / 6.0, zn / 3.0));
            }
            let eps = self.margins[i];
            if !(eps > 0.0 && eps < zn / 6.0) {
                return Err(format!("center {i}: margin {eps} outside (0, ||z||/6)"));
            }
            if !(r > dist) {
                return Err(format!("ball {i}: z is not interior"));
            }
            if !(c.norm() > r) {
                return Err(format!("ball {i}: contains the origin"));
            }
            for (s, w) in self.w0.iter().enumerate() {
                if !((w - c).norm() > r) {
                    return Err(format!("start {s} lies in ball {i}"));
                }
            }
        }
        Ok(())
    }
}

/// Uniformly distributed unit vector; `None` on the measure-zero draw of a
/// zero Gaussian sample.
fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Option<Vector> {
    let g = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = g.norm();
    (norm > 0.0).then(|| g / norm)
}

fn try_generate<R: Rng + ?Sized>(rng: &mut R, dim: usize, n: usize, starts: usize) -> Option<GeneratedProblem> {
    let z = Vector::from_fn(dim, |_, _| rng.random_range(-10.0..=10.0));
    let zn = z.norm();
    if zn == 0.0 {
        return None;
    }
    let mut centers = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    let mut margins = Vec::with_capacity(n);
    for _ in 0..n {
        let dir = unit_vector(rng, dim)?;
        let dist = rng.random_range(zn / 6.0..=zn / 3.0);
        let eps = rng.random_range(0.0..zn / 6.0);
        if eps == 0.0 {
            return None;
        }
        let c = &z + dir * dist;
        radii.push((&z - &c).norm() + eps);
        margins.push(eps);
        centers.push(c);
    }
    let mut q = Vec::with_capacity(n - 1);
    let mut betas = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let w = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.5..=0.5));
        let qj = w.transpose() * w * 0.5;
        betas.push(estimate_cocoercivity(&qj).ok()?);
        q.push(qj);
    }
    let beta = betas.iter().copied().fold(f64::INFINITY, f64::min);
    let reach = radii
        .iter()
        .zip(&margins)
        .map(|(r, e)| 2.0 * r - e)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w0 = Vec::with_capacity(starts);
    for _ in 0..starts {
        let omega = unit_vector(rng, dim)?;
        let eps: f64 = rng.random_range(0.0..=1.0);
        w0.push(&z + omega * (reach + eps));
    }
    Some(GeneratedProblem {
        z,
        centers,
        radii,
        margins,
        q,
        betas,
        beta,
        w0,
    })
}

/// Draws one instance with `starts` starting points, redrawing on degenerate
/// samples or violated invariants.
pub fn generate_problem<R: Rng + ?Sized>(
    dim: usize,
    n: usize,
    starts: usize,
    rng: &mut R,
) -> Result<GeneratedProblem> {
    if dim < 2 {
        return Err(Error::OrderTooSmall { n: dim, min: 2 });
    }
    if n < 2 {
        return Err(Error::OrderTooSmall { n, min: 2 });
    }
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        if let Some(p) = try_generate(rng, dim, n, starts) {
            if p.check_invariants().is_ok() {
                return Ok(p);
            }
        }
    }
    Err(Error::GenerationFailure(MAX_GENERATION_ATTEMPTS))
}

/// Independent stream for `(seed, n, problem_id)`, so instances do not depend
/// on execution order.
pub fn instance_rng(seed: u64, n: usize, problem_id: usize) -> ChaCha8Rng {
    let mut s = seed;
    for part in [n as u64, problem_id as u64] {
        s = splitmix(s ^ splitmix(part.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    ChaCha8Rng::seed_from_u64(s)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The instance used for `(n, problem_id)` under `spec`.
pub fn experiment_problem(spec: &ExperimentSpec, n: usize, problem_id: usize) -> Result<GeneratedProblem> {
    let mut rng = instance_rng(spec.seed, n, problem_id);
    generate_problem(spec.dim, n, spec.starts_per_problem, &mut rng)
}

/// Runs `method` on `problem` from its start `start_id`, with `gamma = gamma_factor beta`
/// and constant `theta`. The complete presets use the rational-coefficient iteration.
pub fn run_method(
    method: Preset,
    problem: &ProblemInstance,
    w0: &Vector,
    spec: &ExperimentSpec,
) -> Result<RunResult> {
    let n = problem.order();
    let beta = problem.beta();
    let gamma = spec.gamma_factor * beta;
    let triple = method.triple(n)?;
    if method.is_complete() {
        let cfg = CompleteConfig::from_generic(gamma, &Relaxation::Constant(spec.theta), n)
            .with_tol(spec.tol)
            .with_max_iters(spec.max_iters)
            .with_stop(spec.stop);
        let cfg = validate_complete(&cfg, beta, n)?;
        let u0 = coefficients(n)?.u_from_w(&vec![w0.clone(); n - 1]);
        run_complete(problem, triple.predecessors(), &cfg, u0)
    } else {
        let cfg = SolverConfig::new(gamma, spec.theta)
            .with_tol(spec.tol)
            .with_max_iters(spec.max_iters)
            .with_stop(spec.stop);
        let cfg = validate_config(&cfg, beta)?;
        run(problem, &triple, &cfg, vec![w0.clone(); n - 1])
    }
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub n: usize,
    pub problem_id: usize,
    pub start_id: usize,
    pub iterations: usize,
    pub wall_time_ms: f64,
    pub final_residual: f64,
    pub converged: bool,
}

impl ResultRow {
    fn key(&self) -> (usize, &str, usize, usize) {
        (self.n, &self.method, self.problem_id, self.start_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// `(method, n, problem_id, start_id, iterations, converged)`, the part of
    /// the table covered by the determinism guarantee.
    pub fn iteration_table(&self) -> Vec<(String, usize, usize, usize, usize, bool)> {
        self.rows
            .iter()
            .map(|r| (r.method.clone(), r.n, r.problem_id, r.start_id, r.iterations, r.converged))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        for r in &self.rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.display().to_string()));
        }
        let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
        let rows = r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_error)?;
        Ok(Self { rows })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Runs every `(n, problem, start, method)` combination. Methods share the
/// instances; rows come back sorted by `(n, method, problem_id, start_id)`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut problems = Vec::new();
    for &n in &spec.n_range {
        for pid in 0..spec.problems_per_n {
            problems.push((n, pid, experiment_problem(spec, n, pid)?));
        }
    }
    let jobs: Vec<(usize, usize, Preset)> = (0..problems.len())
        .flat_map(|idx| {
            (0..spec.starts_per_problem)
                .flat_map(move |s| spec.methods.iter().map(move |&m| (idx, s, m)))
        })
        .collect();
    let instances: Vec<ProblemInstance> = problems
        .iter()
        .map(|(_, _, p)| p.instance())
        .collect::<Result<_>>()?;
    let mut rows = jobs
        .par_iter()
        .map(|&(idx, start, method)| {
            let (n, pid, gen) = &problems[idx];
            let r = run_method(method, &instances[idx], &gen.w0[start], spec)?;
            Ok(ResultRow {
                method: method.name().to_string(),
                n: *n,
                problem_id: *pid,
                start_id: start,
                iterations: r.iterations,
                wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
                final_residual: r.final_residual,
                converged: r.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    Ok(ResultTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub n: usize,
    pub median_iters: f64,
    pub min_iters: usize,
    pub max_iters: usize,
    pub median_time_ms: f64,
    /// Algebraic connectivity of the method's `G'`.
    pub alg_connectivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Per `n`, methods ordered by median iterations (fastest first).
    pub ranking: BTreeMap<usize, Vec<String>>,
}

impl Summary {
    pub fn get(&self, method: &str, n: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method && r.n == n)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        for r in &self.rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Per `(method, n)` medians and ranges, and a per-`n` ranking.
pub fn summarize(table: &ResultTable) -> Result<Summary> {
    if table.rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut groups: BTreeMap<(usize, String), Vec<&ResultRow>> = BTreeMap::new();
    for r in &table.rows {
        groups.entry((r.n, r.method.clone())).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((n, method), group) in groups {
        let preset: Preset = method.parse()?;
        let gp = preset.triple(n)?.laplacian_subgraph().clone();
        let mut iters: Vec<f64> = group.iter().map(|r| r.iterations as f64).collect();
        let mut times: Vec<f64> = group.iter().map(|r| r.wall_time_ms).collect();
        rows.push(SummaryRow {
            method,
            n,
            median_iters: median(&mut iters),
            min_iters: group.iter().map(|r| r.iterations).min().unwrap_or(0),
            max_iters: group.iter().map(|r| r.iterations).max().unwrap_or(0),
            median_time_ms: median(&mut times),
            alg_connectivity: algebraic_connectivity(&gp)?,
        });
    }
    let mut ranking: BTreeMap<usize, Vec<(f64, String)>> = BTreeMap::new();
    for r in &rows {
        ranking.entry(r.n).or_default().push((r.median_iters, r.method.clone()));
    }
    let ranking = ranking
        .into_iter()
        .map(|(n, mut v)| {
            v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1)));
            (n, v.into_iter().map(|(_, m)| m).collect())
        })
        .collect();
    Ok(Summary { rows, ranking })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let p = generate_problem(5, 4, 3, &mut rng).unwrap();
            p.check_invariants().unwrap();
            assert_eq!(p.q.len(), 3);
            assert_eq!(p.w0.len(), 3);
            assert!(p.instance().unwrap().beta() == p.beta);
        }
        assert!(generate_problem(1, 3, 1, &mut rng).is_err());
    }

    #[test]
    fn rng_streams_are_independent_of_order() {
        let a = experiment_problem(&ExperimentSpec { dim: 4, ..ExperimentSpec::fast(9) }, 3, 1).unwrap();
        let b = experiment_problem(&ExperimentSpec { dim: 4, ..ExperimentSpec::fast(9) }, 3, 1).unwrap();
        assert_eq!(a, b);
        let c = experiment_problem(&ExperimentSpec { dim: 4, ..ExperimentSpec::fast(9) }, 3, 2).unwrap();
        assert_ne!(a.z, c.z);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_experiment() {
        let spec = ExperimentSpec {
            dim: 10,
            n_range: vec![3],
            problems_per_n: 2,
            starts_per_problem: 2,
            methods: vec![Preset::Parallel],
            ..ExperimentSpec::fast(1)
        };
        let t = run_experiment(&spec).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.iter().all(|r| r.converged && r.final_residual < 1e-8));
        let s = summarize(&t).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.ranking[&3], vec!["parallel".to_string()]);
        assert_eq!(summarize(&ResultTable::default()), Err(Error::EmptyTable));
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::fast(0);
        spec.methods.clear();
        assert!(spec.validate().is_err());
        let spec = ExperimentSpec {
            n_range: vec![2],
            methods: vec![Preset::Ring],
            ..ExperimentSpec::fast(0)
        };
        assert!(matches!(spec.validate(), Err(Error::UnsupportedOrder { .. })));
    }
}
