//! The generic graph-based forward-backward iteration.
//!
//! One step, for a triple `(G, G', G'')` with degrees `d_i`, onto decomposition
//! `Z` of `Lap(G')` and predecessor map `p`:
//!
//! ```text
//! x_1 = J_{(gamma/d_1) A_1}( (1/d_1) sum_j Z_1j w_j )
//! x_i = J_{(gamma/d_i) A_i}( (2/d_i) sum_{(h,i) in G} x_h
//!                            - (gamma/d_i) B_{i-1}(x_{p(i)})
//!                            + (1/d_i) sum_j Z_ij w_j )          i = 2..n
//! w_j = w_j - theta_k sum_i Z_ij x_i                              j = 1..n-1
//! ```
//!
//! Every resolvent and every forward operator is evaluated exactly once.

mod reductions;

pub use reductions::{reduction_check, ReductionReport};

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::GraphTriple;
use crate::operators::{ProblemInstance, Vector};

/// Relaxation sequence `theta_k`. A finite schedule repeats its last entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    Constant(f64),
    Schedule(Vec<f64>),
}

impl Relaxation {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Relaxation::Constant(t) => *t,
            Relaxation::Schedule(s) => s[k.min(s.len() - 1)],
        }
    }

    /// Multiplies every entry by `factor` (used by changes of variables).
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Relaxation::Constant(t) => Relaxation::Constant(t * factor),
            Relaxation::Schedule(s) => Relaxation::Schedule(s.iter().map(|t| t * factor).collect()),
        }
    }

    fn entries(&self) -> &[f64] {
        match self {
            Relaxation::Constant(t) => std::slice::from_ref(t),
            Relaxation::Schedule(s) => s,
        }
    }

    /// The value repeated forever once a schedule is exhausted.
    fn tail(&self) -> f64 {
        *self.entries().last().expect("validated schedules are nonempty")
    }
}

impl From<f64> for Relaxation {
    fn from(t: f64) -> Self {
        Relaxation::Constant(t)
    }
}

/// When a run counts as converged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StopRule {
    /// `max_i ||x_i^{k+1} - x_i^k|| < tol`.
    #[default]
    Successive,
    /// The successive rule and additionally `max_j ||w_j^{k+1} - w_j^k|| < tol`.
    /// Guards against plateaus where projections clamp every `x_i` exactly
    /// while the governing variables are still moving.
    Guarded,
}

impl StopRule {
    pub fn satisfied(self, residual: f64, governing_change: f64, tol: f64) -> bool {
        match self {
            StopRule::Successive => residual < tol,
            StopRule::Guarded => residual < tol && governing_change < tol,
        }
    }
}

impl std::str::FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "successive" => Ok(StopRule::Successive),
            "guarded" => Ok(StopRule::Guarded),
            other => Err(Error::Parse(format!("unknown stopping rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub theta: Relaxation,
    pub tol: f64,
    pub stop: StopRule,
    pub max_iters: usize,
    pub record_trace: bool,
}

impl SolverConfig {
    pub fn new(gamma: f64, theta: impl Into<Relaxation>) -> Self {
        Self {
            gamma,
            theta: theta.into(),
            tol: 1e-8,
            stop: StopRule::Successive,
            max_iters: 200_000,
            record_trace: false,
        }
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }
}

/// A configuration that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedConfig {
    config: SolverConfig,
    theta_bound: f64,
    divergence_verified: bool,
}

impl CheckedConfig {
    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn gamma(&self) -> f64 {
        self.config.gamma
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.config.theta.at(k)
    }

    /// `(4 beta - gamma) / (2 beta)`.
    pub fn theta_bound(&self) -> f64 {
        self.theta_bound
    }

    /// False when the schedule settles exactly on the bound: the iteration is
    /// still well defined but `sum theta_k (bound - theta_k)` is finite.
    pub fn divergence_verified(&self) -> bool {
        self.divergence_verified
    }
}

/// Relative slack when comparing a relaxation against its upper bound.
pub(crate) const BOUND_SLACK: f64 = 1e-12;

/// Checks `gamma in (0, 4 beta)` and `theta_k in (0, (4 beta - gamma)/(2 beta)]`.
pub fn validate_config(cfg: &SolverConfig, beta: f64) -> Result<CheckedConfig> {
    let upper = 4.0 * beta;
    if !(cfg.gamma > 0.0 && cfg.gamma < upper) {
        return Err(Error::StepsizeOutOfRange {
            value: cfg.gamma,
            upper,
        });
    }
    let bound = (4.0 * beta - cfg.gamma) / (2.0 * beta);
    let divergence_verified = check_relaxation(&cfg.theta, bound)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidOperator(format!("tolerance {} must be positive", cfg.tol)));
    }
    Ok(CheckedConfig {
        config: cfg.clone(),
        theta_bound: bound,
        divergence_verified,
    })
}

/// Returns whether the tail sits strictly inside the bound.
pub(crate) fn check_relaxation(theta: &Relaxation, bound: f64) -> Result<bool> {
    let entries = theta.entries();
    if entries.is_empty() {
        return Err(Error::RelaxationOutOfRange {
            k: 0,
            value: f64::NAN,
            bound,
        });
    }
    for (k, &t) in entries.iter().enumerate() {
        if !(t > 0.0 && t <= bound * (1.0 + BOUND_SLACK)) {
            return Err(Error::RelaxationOutOfRange { k, value: t, bound });
        }
    }
    Ok(theta.tail() < bound * (1.0 - BOUND_SLACK))
}

/// Argument and scaling of one resolvent call, enough to recover the selection
/// `a_i = (argument - x_i) / sigma` lying in `A_i(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProbe {
    pub sigma: f64,
    pub argument: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Governing variables `w_1..w_{n-1}`.
    pub w: Vec<Vector>,
    /// Resolvent variables `x_1..x_n` of the last step (zero before the first).
    pub x: Vec<Vector>,
    pub k: usize,
    pub last_residual: f64,
    /// `max_j ||w_j^{k+1} - w_j^k||` of the last step.
    pub last_governing_change: f64,
    /// Resolvent calls of the last step, one per node.
    pub probes: Vec<ResolventProbe>,
}

impl SolverState {
    pub fn new(w0: Vec<Vector>, n: usize, dim: usize) -> Result<Self> {
        if w0.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                what: "governing variable count",
                expected: n - 1,
                found: w0.len(),
            });
        }
        if let Some(w) = w0.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "governing variable length",
                expected: dim,
                found: w.len(),
            });
        }
        Ok(Self {
            w: w0,
            x: vec![Vector::zeros(dim); n],
            k: 0,
            last_residual: f64::INFINITY,
            last_governing_change: f64::INFINITY,
            probes: Vec::new(),
        })
    }

    /// Replicates one starting vector into all `n - 1` governing slots.
    pub fn broadcast(w0: &Vector, n: usize) -> Self {
        Self::new(vec![w0.clone(); n - 1], n, w0.len()).expect("broadcast shapes agree")
    }

    /// `max_{i,j} ||x_i - x_j||`.
    pub fn consensus_spread(&self) -> f64 {
        consensus_spread(&self.x)
    }
}

pub fn consensus_spread(x: &[Vector]) -> f64 {
    let mut spread = 0.0f64;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            spread = spread.max((&x[i] - &x[j]).norm());
        }
    }
    spread
}

/// Record of the operator calls made during one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepAudit {
    /// `(node, sigma, argument)` per resolvent call, one-based node.
    pub resolvent_calls: Vec<(usize, f64, Vector)>,
    /// `(operator index j, argument)` per forward call of `B_j`.
    pub forward_calls: Vec<(usize, Vector)>,
}

/// One iteration. The returned state carries the new `x`, `w` and residual.
pub fn step(
    state: &SolverState,
    prob: &ProblemInstance,
    triple: &GraphTriple,
    cfg: &CheckedConfig,
) -> Result<SolverState> {
    advance(state, prob, triple, cfg, None)
}

/// [`step`], additionally recording every operator call.
pub fn step_traced(
    state: &SolverState,
    prob: &ProblemInstance,
    triple: &GraphTriple,
    cfg: &CheckedConfig,
    audit: &mut StepAudit,
) -> Result<SolverState> {
    advance(state, prob, triple, cfg, Some(audit))
}

fn check_dims(state: &SolverState, prob: &ProblemInstance, triple: &GraphTriple) -> Result<()> {
    let n = triple.order();
    if prob.order() != n {
        return Err(Error::DimensionMismatch {
            what: "operator count vs graph order",
            expected: n,
            found: prob.order(),
        });
    }
    if state.w.len() != n - 1 || state.x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "state length",
            expected: n - 1,
            found: state.w.len(),
        });
    }
    let d = prob.dim();
    if let Some(v) = state.w.iter().chain(&state.x).find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "state vector length",
            expected: d,
            found: v.len(),
        });
    }
    Ok(())
}

fn advance(
    state: &SolverState,
    prob: &ProblemInstance,
    triple: &GraphTriple,
    cfg: &CheckedConfig,
    mut audit: Option<&mut StepAudit>,
) -> Result<SolverState> {
    check_dims(state, prob, triple)?;
    let n = triple.order();
    let d = prob.dim();
    let z = triple.onto();
    let gamma = cfg.gamma();
    let theta = cfg.theta(state.k);

    let mut x: Vec<Vector> = Vec::with_capacity(n);
    let mut probes = Vec::with_capacity(n);
    for i in 0..n {
        let di = triple.degrees()[i];
        let mut arg = Vector::zeros(d);
        for (j, w) in state.w.iter().enumerate() {
            let zij = z[(i, j)];
            if zij != 0.0 {
                arg.axpy(zij, w, 1.0);
            }
        }
        if i > 0 {
            let mut sum = Vector::zeros(d);
            for &h in triple.in_neighbors0(i) {
                sum += &x[h];
            }
            arg.axpy(2.0, &sum, 1.0);
            let p = triple.predecessor(i + 1) - 1;
            let b = prob.forward(i).apply(&x[p]);
            if let Some(a) = audit.as_deref_mut() {
                a.forward_calls.push((i, x[p].clone()));
            }
            arg.axpy(-gamma, &b, 1.0);
        }
        arg /= di;
        let sigma = gamma / di;
        let xi = prob.resolvent(i + 1).resolve(sigma, &arg);
        if let Some(a) = audit.as_deref_mut() {
            a.resolvent_calls.push((i + 1, sigma, arg.clone()));
        }
        probes.push(ResolventProbe {
            sigma,
            argument: arg,
        });
        x.push(xi);
    }

    let mut w = state.w.clone();
    for (j, wj) in w.iter_mut().enumerate() {
        for (i, xi) in x.iter().enumerate() {
            let zij = z[(i, j)];
            if zij != 0.0 {
                wj.axpy(-theta * zij, xi, 1.0);
            }
        }
    }

    let residual = successive_residual(&x, &state.x);
    let governing_change = successive_residual(&w, &state.w);
    Ok(SolverState {
        w,
        x,
        k: state.k + 1,
        last_residual: residual,
        last_governing_change: governing_change,
        probes,
    })
}

/// `max_i ||x_i - prev_i||`.
pub fn successive_residual(x: &[Vector], prev: &[Vector]) -> f64 {
    x.iter()
        .zip(prev)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// `x_n` of the final iterate.
    pub x_star: Vector,
    /// All resolvent variables of the final iterate.
    pub x: Vec<Vector>,
    pub w_star: Vec<Vector>,
    pub iterations: usize,
    pub wall_time: Duration,
    pub residual_trace: Option<Vec<f64>>,
    pub final_residual: f64,
    pub converged: bool,
    pub probes: Vec<ResolventProbe>,
}

/// Iterates [`step`] until the stopping rule holds or `max_iters` steps were
/// taken. Not converging is reported through
/// [`RunResult::converged`], not as an error.
pub fn run(
    prob: &ProblemInstance,
    triple: &GraphTriple,
    cfg: &CheckedConfig,
    w0: Vec<Vector>,
) -> Result<RunResult> {
    let start = Instant::now();
    let mut state = SolverState::new(w0, triple.order(), prob.dim())?;
    let record = cfg.config().record_trace;
    let mut trace = record.then(Vec::new);
    let mut converged = false;
    while state.k < cfg.config().max_iters {
        state = step(&state, prob, triple, cfg)?;
        if let Some(t) = trace.as_mut() {
            t.push(state.last_residual);
        }
        let c = cfg.config();
        if c.stop.satisfied(state.last_residual, state.last_governing_change, c.tol) {
            converged = true;
            break;
        }
    }
    Ok(RunResult {
        x_star: state.x[triple.order() - 1].clone(),
        iterations: state.k,
        wall_time: start.elapsed(),
        residual_trace: trace,
        final_residual: state.last_residual,
        converged,
        x: state.x,
        w_star: state.w,
        probes: state.probes,
    })
}
