//! The complete-graph iteration with rational coefficients.
//!
//! With `G = G'` complete and the closed-form onto decomposition, the generic
//! iteration simplifies after the substitution `u_j = a_j w_j / (n - 1)`,
//! `lambda = gamma / (n - 1)`, `mu_k = n theta_k / (n - 1)` to
//!
//! ```text
//! x_1 = J_{lambda A_1}(u_1)
//! x_i = J_{lambda A_i}( (2/(n-1)) sum_{h<i} x_h - lambda B_{i-1}(x_{p(i)})
//!                       + u_i - sum_{j<i} u_j / (n-j) )              i = 2..n-1
//! x_n = J_{lambda A_n}( (2/(n-1)) sum_{h<n} x_h - lambda B_{n-1}(x_{p(n)})
//!                       - sum_{j<n} u_j / (n-j) )
//! u_i = u_i - mu_k ( (n-i)/(n-i+1) x_i - (1/(n-i+1)) sum_{j>i} x_j )
//! ```

use std::time::Instant;

use crate::error::{Error, Result};
use crate::solver::{
    check_relaxation, successive_residual, Relaxation, ResolventProbe, RunResult, StepAudit,
    StopRule,
};
use crate::operators::{ProblemInstance, Vector};

/// `a_i = sqrt((n-i) n / (n-i+1))` and `t_i = -sqrt(n / ((n-i)(n-i+1)))`
/// for `i = 1..n-1` (stored zero-based).
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteCoefficients {
    pub n: usize,
    pub a: Vec<f64>,
    pub t: Vec<f64>,
}

pub fn coefficients(n: usize) -> Result<CompleteCoefficients> {
    if n < 2 {
        return Err(Error::OrderTooSmall { n, min: 2 });
    }
    let nf = n as f64;
    let (a, t) = (1..n)
        .map(|i| {
            let m = (n - i) as f64;
            ((m * nf / (m + 1.0)).sqrt(), -(nf / (m * (m + 1.0))).sqrt())
        })
        .unzip();
    Ok(CompleteCoefficients { n, a, t })
}

impl CompleteCoefficients {
    /// `u_j = a_j w_j / (n - 1)`.
    pub fn u_from_w(&self, w: &[Vector]) -> Vec<Vector> {
        let m = (self.n - 1) as f64;
        w.iter().zip(&self.a).map(|(w, a)| w * (a / m)).collect()
    }

    /// Inverse of [`CompleteCoefficients::u_from_w`].
    pub fn w_from_u(&self, u: &[Vector]) -> Vec<Vector> {
        let m = (self.n - 1) as f64;
        u.iter().zip(&self.a).map(|(u, a)| u * (m / a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompleteConfig {
    pub lambda: f64,
    pub mu: Relaxation,
    pub tol: f64,
    /// Applied to `x` and to the unscaled governing variables `w`.
    pub stop: StopRule,
    pub max_iters: usize,
    pub record_trace: bool,
}

impl CompleteConfig {
    pub fn new(lambda: f64, mu: impl Into<Relaxation>) -> Self {
        Self {
            lambda,
            mu: mu.into(),
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

    /// `lambda = gamma / (n - 1)` and `mu_k = n theta_k / (n - 1)`.
    pub fn from_generic(gamma: f64, theta: &Relaxation, n: usize) -> Self {
        let m = (n - 1) as f64;
        Self::new(gamma / m, theta.scaled(n as f64 / m))
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

/// A configuration that passed [`validate_complete`] for a given order.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedCompleteConfig {
    config: CompleteConfig,
    n: usize,
    mu_bound: f64,
    divergence_verified: bool,
    coefficients: CompleteCoefficients,
}

impl CheckedCompleteConfig {
    pub fn config(&self) -> &CompleteConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// `(2/(n-1) - lambda/(2 beta)) n`.
    pub fn mu_bound(&self) -> f64 {
        self.mu_bound
    }

    pub fn divergence_verified(&self) -> bool {
        self.divergence_verified
    }

    pub fn coefficients(&self) -> &CompleteCoefficients {
        &self.coefficients
    }
}

/// Checks `lambda in (0, 4 beta/(n-1))` and `mu_k in (0, (2/(n-1) - lambda/(2 beta)) n]`.
pub fn validate_complete(cfg: &CompleteConfig, beta: f64, n: usize) -> Result<CheckedCompleteConfig> {
    let coefficients = coefficients(n)?;
    let m = (n - 1) as f64;
    let upper = 4.0 * beta / m;
    if !(cfg.lambda > 0.0 && cfg.lambda < upper) {
        return Err(Error::StepsizeOutOfRange {
            value: cfg.lambda,
            upper,
        });
    }
    let mu_bound = (2.0 / m - cfg.lambda / (2.0 * beta)) * n as f64;
    let divergence_verified = check_relaxation(&cfg.mu, mu_bound)?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidOperator(format!("tolerance {} must be positive", cfg.tol)));
    }
    Ok(CheckedCompleteConfig {
        config: cfg.clone(),
        n,
        mu_bound,
        divergence_verified,
        coefficients,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompleteState {
    /// Scaled governing variables `u_1..u_{n-1}`.
    pub u: Vec<Vector>,
    pub x: Vec<Vector>,
    pub k: usize,
    pub last_residual: f64,
    /// `max_j ||w_j^{k+1} - w_j^k||` with `w_j = (n - 1) u_j / a_j`.
    pub last_governing_change: f64,
    pub probes: Vec<ResolventProbe>,
}

impl CompleteState {
    pub fn new(u0: Vec<Vector>, n: usize, dim: usize) -> Result<Self> {
        if u0.len() + 1 != n {
            return Err(Error::DimensionMismatch {
                what: "governing variable count",
                expected: n - 1,
                found: u0.len(),
            });
        }
        if let Some(u) = u0.iter().find(|u| u.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "governing variable length",
                expected: dim,
                found: u.len(),
            });
        }
        Ok(Self {
            u: u0,
            x: vec![Vector::zeros(dim); n],
            k: 0,
            last_residual: f64::INFINITY,
            last_governing_change: f64::INFINITY,
            probes: Vec::new(),
        })
    }
}

/// Checks that `pred` (entry `i - 2` is `p(i)`) only points backwards, which
/// is all the complete graph requires of `G''`.
pub fn check_predecessors(pred: &[usize], n: usize) -> Result<()> {
    if pred.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            what: "predecessor map length",
            expected: n - 1,
            found: pred.len(),
        });
    }
    for (k, &p) in pred.iter().enumerate() {
        let i = k + 2;
        if p == 0 || p >= i {
            return Err(Error::NotASubgraph(p, i));
        }
    }
    Ok(())
}

pub fn step_complete(
    state: &CompleteState,
    prob: &ProblemInstance,
    pred: &[usize],
    cfg: &CheckedCompleteConfig,
) -> Result<CompleteState> {
    advance(state, prob, pred, cfg, None)
}

/// [`step_complete`], additionally recording every operator call.
pub fn step_complete_traced(
    state: &CompleteState,
    prob: &ProblemInstance,
    pred: &[usize],
    cfg: &CheckedCompleteConfig,
    audit: &mut StepAudit,
) -> Result<CompleteState> {
    advance(state, prob, pred, cfg, Some(audit))
}

fn advance(
    state: &CompleteState,
    prob: &ProblemInstance,
    pred: &[usize],
    cfg: &CheckedCompleteConfig,
    mut audit: Option<&mut StepAudit>,
) -> Result<CompleteState> {
    let n = cfg.order();
    if prob.order() != n {
        return Err(Error::DimensionMismatch {
            what: "operator count vs graph order",
            expected: n,
            found: prob.order(),
        });
    }
    check_predecessors(pred, n)?;
    let d = prob.dim();
    if state.u.len() + 1 != n || state.x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "state length",
            expected: n - 1,
            found: state.u.len(),
        });
    }
    if let Some(v) = state.u.iter().chain(&state.x).find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "state vector length",
            expected: d,
            found: v.len(),
        });
    }
    let lambda = cfg.config().lambda;
    let mu = cfg.config().mu.at(state.k);
    let m = (n - 1) as f64;

    let mut x: Vec<Vector> = Vec::with_capacity(n);
    let mut probes = Vec::with_capacity(n);
    let mut x_prefix = Vector::zeros(d);
    let mut u_prefix = Vector::zeros(d);
    for i in 0..n {
        let arg = if i == 0 {
            state.u[0].clone()
        } else {
            let p = pred[i - 1] - 1;
            let b = prob.forward(i).apply(&x[p]);
            if let Some(a) = audit.as_deref_mut() {
                a.forward_calls.push((i, x[p].clone()));
            }
            let mut arg = &x_prefix * (2.0 / m) - &u_prefix;
            arg.axpy(-lambda, &b, 1.0);
            if i < n - 1 {
                arg += &state.u[i];
            }
            arg
        };
        if i < n - 1 {
            // u_j / (n - j) with one-based j = i + 1
            u_prefix.axpy(1.0 / (n - i - 1) as f64, &state.u[i], 1.0);
        }
        let xi = prob.resolvent(i + 1).resolve(lambda, &arg);
        if let Some(a) = audit.as_deref_mut() {
            a.resolvent_calls.push((i + 1, lambda, arg.clone()));
        }
        x_prefix += &xi;
        probes.push(ResolventProbe {
            sigma: lambda,
            argument: arg,
        });
        x.push(xi);
    }

    let mut u = state.u.clone();
    let mut x_suffix = Vector::zeros(d);
    for i in (0..n).rev() {
        if i < n - 1 {
            let r = (n - i) as f64; // n - i + 1 for one-based i
            let mut delta = &x[i] * ((r - 1.0) / r);
            delta.axpy(-1.0 / r, &x_suffix, 1.0);
            u[i].axpy(-mu, &delta, 1.0);
        }
        x_suffix += &x[i];
    }

    let residual = successive_residual(&x, &state.x);
    let coeffs = cfg.coefficients();
    let governing_change = successive_residual(&coeffs.w_from_u(&u), &coeffs.w_from_u(&state.u));
    Ok(CompleteState {
        u,
        x,
        k: state.k + 1,
        last_residual: residual,
        last_governing_change: governing_change,
        probes,
    })
}

/// Iterates [`step_complete`] with the same stopping rule as
/// [`crate::solver::run`]. `w_star` of the result holds the governing
/// variables mapped back through `w_j = (n - 1) u_j / a_j`.
pub fn run_complete(
    prob: &ProblemInstance,
    pred: &[usize],
    cfg: &CheckedCompleteConfig,
    u0: Vec<Vector>,
) -> Result<RunResult> {
    let start = Instant::now();
    let n = cfg.order();
    let mut state = CompleteState::new(u0, n, prob.dim())?;
    let mut trace = cfg.config().record_trace.then(Vec::new);
    let mut converged = false;
    while state.k < cfg.config().max_iters {
        state = step_complete(&state, prob, pred, cfg)?;
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
        x_star: state.x[n - 1].clone(),
        w_star: cfg.coefficients().w_from_u(&state.u),
        iterations: state.k,
        wall_time: start.elapsed(),
        residual_trace: trace,
        final_residual: state.last_residual,
        converged,
        x: state.x,
        probes: state.probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_onto_decomposition, Preset};
    use crate::operators::{BoxNormalCone, Forward, QuadraticGradient, Resolvent, ZeroForward, ZeroOperator};
    use crate::sampling::{random_instance, random_start};
    use crate::solver::{step, validate_config, SolverConfig, SolverState};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn coefficient_examples() {
        let c = coefficients(2).unwrap();
        assert_abs_diff_eq!(c.a[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.t[0], -1.0, epsilon = 1e-15);
        let c = coefficients(4).unwrap();
        assert_abs_diff_eq!(c.a[2], 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.t[2], -(2f64.sqrt()), epsilon = 1e-15);
        let c = coefficients(3).unwrap();
        assert_abs_diff_eq!(c.a[0], 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.t[0], -(0.5f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(c.a[1], 1.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.a[0].powi(2) - c.t[0].powi(2) - c.a[1].powi(2), 0.0, epsilon = 1e-15);
        assert_eq!(coefficients(1), Err(Error::OrderTooSmall { n: 1, min: 2 }));
    }

    #[test]
    fn coefficients_match_closed_form_onto() {
        for n in 2..12 {
            let c = coefficients(n).unwrap();
            let z = complete_onto_decomposition(n);
            for j in 0..n - 1 {
                assert_eq!(z[(j, j)], c.a[j]);
                for i in j + 1..n {
                    assert_eq!(z[(i, j)], c.t[j]);
                }
            }
        }
    }

    #[test]
    fn validation() {
        let cfg = CompleteConfig::new(2.0, 0.5);
        assert!(matches!(
            validate_complete(&cfg, 1.0, 3),
            Err(Error::StepsizeOutOfRange { .. })
        ));
        let checked = validate_complete(&CompleteConfig::new(1.0, 0.5), 1.0, 3).unwrap();
        assert_abs_diff_eq!(checked.mu_bound(), 1.5, epsilon = 1e-15);
        assert!(matches!(
            validate_complete(&CompleteConfig::new(1.0, 1.6), 1.0, 3),
            Err(Error::RelaxationOutOfRange { .. })
        ));
    }

    #[test]
    fn bridge_to_generic_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6 {
            for kind in [Preset::CompleteSeq, Preset::CompletePar] {
                let triple = kind.triple(n).unwrap();
                let prob = random_instance(&mut rng, 3, n);
                let beta = prob.beta();
                let gamma = 1.3 * beta;
                let theta = 0.8;
                let gcfg = validate_config(&SolverConfig::new(gamma, theta), beta).unwrap();
                let ccfg = validate_complete(
                    &CompleteConfig::from_generic(gamma, &theta.into(), n),
                    beta,
                    n,
                )
                .unwrap();
                let w0 = random_start(&mut rng, 3, n);
                let coeffs = coefficients(n).unwrap();
                let mut gs = SolverState::new(w0.clone(), n, 3).unwrap();
                let mut cs = CompleteState::new(coeffs.u_from_w(&w0), n, 3).unwrap();
                for _ in 0..30 {
                    gs = step(&gs, &prob, &triple, &gcfg).unwrap();
                    cs = step_complete(&cs, &prob, triple.predecessors(), &ccfg).unwrap();
                    for (a, b) in gs.x.iter().zip(&cs.x) {
                        assert!((a - b).amax() < 1e-10);
                    }
                    for (a, b) in coeffs.u_from_w(&gs.w).iter().zip(&cs.u) {
                        assert!((a - b).amax() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_operators_consensus_is_fixed() {
        let prob = ProblemInstance::new(
            2,
            (0..4).map(|_| Arc::new(ZeroOperator) as Arc<dyn Resolvent>).collect(),
            (0..3).map(|_| Arc::new(ZeroForward) as Arc<dyn Forward>).collect(),
        )
        .unwrap();
        let cfg = validate_complete(&CompleteConfig::new(0.5, 1.0), prob.beta(), 4).unwrap();
        let pred = [1, 2, 3];
        // u_j = (n - j) c / (n - 1) makes every resolvent argument equal to c
        let c = dvector![2.0, -1.0];
        let u0 = vec![c.clone(), &c * (2.0 / 3.0), &c * (1.0 / 3.0)];
        let mut s = CompleteState::new(u0, 4, 2).unwrap();
        s = step_complete(&s, &prob, &pred, &cfg).unwrap();
        for xi in &s.x {
            assert_abs_diff_eq!(xi.clone(), c.clone(), epsilon = 1e-14);
        }
        let again = step_complete(&s, &prob, &pred, &cfg).unwrap();
        assert_eq!(again.u, s.u);
    }

    #[test]
    fn kkt_problem_three_nodes() {
        let prob = ProblemInstance::new(
            1,
            vec![
                Arc::new(BoxNormalCone::new(dvector![-1.0], dvector![1.0]).unwrap()),
                Arc::new(BoxNormalCone::new(dvector![0.5], dvector![2.0]).unwrap()),
                Arc::new(ZeroOperator),
            ],
            vec![
                Arc::new(QuadraticGradient::new(dmatrix![1.0]).unwrap()),
                Arc::new(ZeroForward),
            ],
        )
        .unwrap();
        for pred in [[1, 2], [1, 1]] {
            let cfg = validate_complete(
                &CompleteConfig::from_generic(prob.beta(), &0.99.into(), 3).with_stop(StopRule::Guarded),
                prob.beta(),
                3,
            )
            .unwrap();
            let coeffs = coefficients(3).unwrap();
            let u0 = coeffs.u_from_w(&[dvector![10.0], dvector![10.0]]);
            let r = run_complete(&prob, &pred, &cfg, u0).unwrap();
            assert!(r.converged);
            assert_abs_diff_eq!(r.x_star[0], 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn frugal_and_validated_predecessors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let prob = random_instance(&mut rng, 2, 5);
        let cfg = validate_complete(&CompleteConfig::new(0.1 * prob.beta(), 0.5), prob.beta(), 5).unwrap();
        let s = CompleteState::new(random_start(&mut rng, 2, 5), 5, 2).unwrap();
        let mut audit = StepAudit::default();
        step_complete_traced(&s, &prob, &[1, 1, 2, 3], &cfg, &mut audit).unwrap();
        assert_eq!(audit.resolvent_calls.len(), 5);
        assert_eq!(audit.forward_calls.len(), 4);
        assert_eq!(
            step_complete(&s, &prob, &[1, 3, 2, 3], &cfg),
            Err(Error::NotASubgraph(3, 3))
        );
    }
}
