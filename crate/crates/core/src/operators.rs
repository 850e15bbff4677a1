//! Maximally monotone operators (used through their resolvents) and cocoercive
//! operators (evaluated forward) on `R^d`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;

/// `beta` used when every forward operator is zero, so the stepsize bound
/// `gamma < 4 beta` never binds.
pub const UNBOUNDED_BETA: f64 = 1e8;

/// A maximally monotone operator `A`, exposed through `J_{sigma A} = (I + sigma A)^{-1}`.
pub trait Resolvent: Debug + Send + Sync {
    fn resolve(&self, sigma: f64, v: &Vector) -> Vector;

    /// Ambient dimension, or `None` when the operator works in any dimension.
    fn dim(&self) -> Option<usize> {
        None
    }
}

/// A `beta`-cocoercive single-valued operator.
pub trait Forward: Debug + Send + Sync {
    fn apply(&self, x: &Vector) -> Vector;

    /// Tight cocoercivity constant; `f64::INFINITY` for the zero operator.
    fn beta(&self) -> f64;

    fn dim(&self) -> Option<usize> {
        None
    }
}

/// Projection of `x` onto the closed ball `B(center, radius)`.
pub fn ball_projection(center: &Vector, radius: f64, x: &Vector) -> Vector {
    let diff = x - center;
    let dist = diff.norm();
    if dist <= radius {
        x.clone()
    } else {
        center + diff * (radius / dist)
    }
}

/// Evaluates `x = J_{sigma A}(v)` and the matching selection `a = (v - x) / sigma`,
/// which lies in `A(x)`.
pub fn residual_element(op: &dyn Resolvent, sigma: f64, v: &Vector) -> (Vector, Vector) {
    let x = op.resolve(sigma, v);
    let a = (v - &x) / sigma;
    (x, a)
}

/// `A = 0`; the resolvent is the identity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroOperator;

impl Resolvent for ZeroOperator {
    fn resolve(&self, _sigma: f64, v: &Vector) -> Vector {
        v.clone()
    }
}

/// Normal cone of a closed ball; its resolvent is the projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BallNormalCone {
    pub center: Vector,
    pub radius: f64,
}

impl BallNormalCone {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidOperator(format!("ball radius {radius} must be positive")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: &Vector, slack: f64) -> bool {
        (x - &self.center).norm() <= self.radius + slack
    }
}

impl Resolvent for BallNormalCone {
    fn resolve(&self, _sigma: f64, v: &Vector) -> Vector {
        ball_projection(&self.center, self.radius, v)
    }

    fn dim(&self) -> Option<usize> {
        Some(self.center.len())
    }
}

/// Normal cone of the box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxNormalCone {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoxNormalCone {
    pub fn new(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds",
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidOperator("box needs lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }
}

impl Resolvent for BoxNormalCone {
    fn resolve(&self, _sigma: f64, v: &Vector) -> Vector {
        Vector::from_iterator(
            v.len(),
            v.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .map(|(x, (l, h))| x.clamp(*l, *h)),
        )
    }

    fn dim(&self) -> Option<usize> {
        Some(self.lo.len())
    }
}

/// `A(x) = M x` with `M` symmetric positive semidefinite; the resolvent solves
/// `(I + sigma M) x = v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMonotone {
    pub matrix: DMatrix<f64>,
}

impl LinearMonotone {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_square(&matrix)?;
        Ok(Self { matrix })
    }
}

impl Resolvent for LinearMonotone {
    fn resolve(&self, sigma: f64, v: &Vector) -> Vector {
        let d = self.matrix.nrows();
        let system = DMatrix::identity(d, d) + &self.matrix * sigma;
        // I + sigma M is positive definite for PSD M
        match system.clone().cholesky() {
            Some(ch) => ch.solve(v),
            None => system
                .lu()
                .solve(v)
                .expect("I + sigma M is nonsingular for monotone M"),
        }
    }

    fn dim(&self) -> Option<usize> {
        Some(self.matrix.nrows())
    }
}

/// `B = 0`. Imposes no cocoercivity bound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroForward;

impl Forward for ZeroForward {
    fn apply(&self, x: &Vector) -> Vector {
        Vector::zeros(x.len())
    }

    fn beta(&self) -> f64 {
        f64::INFINITY
    }
}

/// Gradient of `x^T Q x / 2`, i.e. `B(x) = Q x`, with `beta = 1 / ||Q||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGradient {
    pub q: DMatrix<f64>,
    beta: f64,
}

impl QuadraticGradient {
    /// Estimates `beta` by power iteration.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        check_square(&q)?;
        let beta = estimate_cocoercivity(&q)?;
        Ok(Self { q, beta })
    }

    /// Uses a known constant (e.g. one read back from a problem file).
    pub fn with_beta(q: DMatrix<f64>, beta: f64) -> Result<Self> {
        check_square(&q)?;
        if !(beta > 0.0) {
            return Err(Error::InvalidOperator(format!("beta {beta} must be positive")));
        }
        Ok(Self { q, beta })
    }
}

impl Forward for QuadraticGradient {
    fn apply(&self, x: &Vector) -> Vector {
        &self.q * x
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn dim(&self) -> Option<usize> {
        Some(self.q.nrows())
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            what: "square matrix",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

const POWER_REL_TOL: f64 = 1e-8;
const POWER_MAX_ITERS: usize = 10_000;

/// `1 / lambda_max(Q)` for a symmetric PSD `Q`, by power iteration. Stops once
/// the eigen-residual `||Q v - lambda v||` is below `1e-8 lambda`; a stalled
/// Rayleigh quotient alone is not trusted, since it stalls below `lambda_max`
/// when the top eigenvalues are close.
pub fn estimate_cocoercivity(q: &DMatrix<f64>) -> Result<f64> {
    let d = q.nrows();
    // fixed, non-symmetric start so results are reproducible
    let mut v = Vector::from_fn(d, |i, _| 1.0 + ((i as f64) * 0.754_877_666_246_692_7).fract());
    v.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = q * &v;
        lambda = v.dot(&w);
        let norm = w.norm();
        if norm < 1e-300 {
            lambda = 0.0;
            break;
        }
        let done = (&w - &v * lambda).norm() <= POWER_REL_TOL * lambda.abs();
        v = w / norm;
        if done {
            break;
        }
    }
    if lambda < 1e-14 {
        return Err(Error::ZeroMatrix(1e-14));
    }
    Ok(1.0 / lambda)
}

/// Sum of `n` maximally monotone operators and `n - 1` cocoercive operators
/// sharing the constant `beta`.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    dim: usize,
    resolvents: Vec<Arc<dyn Resolvent>>,
    forwards: Vec<Arc<dyn Forward>>,
    beta: f64,
}

impl ProblemInstance {
    /// `beta` defaults to the smallest tight constant of the forward operators,
    /// or [`UNBOUNDED_BETA`] if they are all zero.
    pub fn new(
        dim: usize,
        resolvents: Vec<Arc<dyn Resolvent>>,
        forwards: Vec<Arc<dyn Forward>>,
    ) -> Result<Self> {
        let n = resolvents.len();
        if n < 2 {
            return Err(Error::OrderTooSmall { n, min: 2 });
        }
        if forwards.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                what: "forward operator count",
                expected: n - 1,
                found: forwards.len(),
            });
        }
        let dims = resolvents
            .iter()
            .map(|r| r.dim())
            .chain(forwards.iter().map(|f| f.dim()));
        for found in dims.flatten() {
            if found != dim {
                return Err(Error::DimensionMismatch {
                    what: "operator dimension",
                    expected: dim,
                    found,
                });
            }
        }
        let beta = tight_beta(&forwards).unwrap_or(UNBOUNDED_BETA);
        Ok(Self {
            dim,
            resolvents,
            forwards,
            beta,
        })
    }

    /// Replaces `beta` with a smaller (more conservative) constant.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidOperator(format!("beta {beta} must be positive")));
        }
        if let Some(tight) = tight_beta(&self.forwards) {
            if beta > tight * (1.0 + 1e-12) {
                return Err(Error::BetaTooLarge {
                    requested: beta,
                    tight,
                });
            }
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of maximally monotone operators.
    pub fn order(&self) -> usize {
        self.resolvents.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `A_i`, one-based.
    pub fn resolvent(&self, i: usize) -> &dyn Resolvent {
        self.resolvents[i - 1].as_ref()
    }

    /// `B_j`, one-based (`1..n-1`).
    pub fn forward(&self, j: usize) -> &dyn Forward {
        self.forwards[j - 1].as_ref()
    }

    pub fn resolvents(&self) -> &[Arc<dyn Resolvent>] {
        &self.resolvents
    }

    pub fn forwards(&self) -> &[Arc<dyn Forward>] {
        &self.forwards
    }
}

fn tight_beta(forwards: &[Arc<dyn Forward>]) -> Option<f64> {
    forwards
        .iter()
        .map(|f| f.beta())
        .filter(|b| b.is_finite())
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn ball_projection_cases() {
        let o = dvector![0.0, 0.0];
        assert_eq!(ball_projection(&o, 1.0, &dvector![2.0, 0.0]), dvector![1.0, 0.0]);
        assert_eq!(ball_projection(&o, 1.0, &dvector![0.3, 0.4]), dvector![0.3, 0.4]);
        assert_eq!(
            ball_projection(&dvector![1.0, 1.0], 2.0, &dvector![1.0, 4.0]),
            dvector![1.0, 3.0]
        );
    }

    #[test]
    fn cocoercivity_simple() {
        assert_abs_diff_eq!(
            estimate_cocoercivity(&DMatrix::identity(3, 3)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            estimate_cocoercivity(&dmatrix![4.0, 0.0; 0.0, 1.0]).unwrap(),
            0.25,
            epsilon = 1e-8
        );
        assert_eq!(
            estimate_cocoercivity(&DMatrix::zeros(2, 2)),
            Err(Error::ZeroMatrix(1e-14))
        );
    }

    #[test]
    fn residual_elements() {
        let (x, a) = residual_element(&ZeroOperator, 1.0, &dvector![5.0]);
        assert_eq!((x, a), (dvector![5.0], dvector![0.0]));

        let ball = BallNormalCone::new(dvector![0.0], 1.0).unwrap();
        let (x, a) = residual_element(&ball, 1.0, &dvector![3.0]);
        assert_eq!((x, a.clone()), (dvector![1.0], dvector![2.0]));
        assert!(a[0] >= 0.0);

        let lin = LinearMonotone::new(dmatrix![1.0]).unwrap();
        let (x, a) = residual_element(&lin, 1.0, &dvector![4.0]);
        assert_abs_diff_eq!(x, dvector![2.0], epsilon = 1e-15);
        assert_abs_diff_eq!(a, dvector![2.0], epsilon = 1e-15);
    }

    #[test]
    fn boxes_clamp() {
        let b = BoxNormalCone::new(dvector![0.5], dvector![2.0]).unwrap();
        assert_eq!(b.resolve(3.0, &dvector![0.0]), dvector![0.5]);
        assert_eq!(b.resolve(3.0, &dvector![1.0]), dvector![1.0]);
        assert!(BoxNormalCone::new(dvector![1.0], dvector![0.0]).is_err());
    }

    #[test]
    fn instance_beta_rules() {
        let q = QuadraticGradient::with_beta(DMatrix::identity(1, 1), 1.0).unwrap();
        let slow = QuadraticGradient::with_beta(DMatrix::identity(1, 1) * 4.0, 0.25).unwrap();
        let p = ProblemInstance::new(
            1,
            vec![Arc::new(ZeroOperator), Arc::new(ZeroOperator), Arc::new(ZeroOperator)],
            vec![Arc::new(q), Arc::new(slow)],
        )
        .unwrap();
        assert_eq!(p.beta(), 0.25);
        assert!(matches!(p.clone().with_beta(0.5), Err(Error::BetaTooLarge { .. })));
        assert_eq!(p.with_beta(0.1).unwrap().beta(), 0.1);

        let zeros = ProblemInstance::new(
            1,
            vec![Arc::new(ZeroOperator), Arc::new(ZeroOperator)],
            vec![Arc::new(ZeroForward)],
        )
        .unwrap();
        assert_eq!(zeros.beta(), UNBOUNDED_BETA);

        assert!(matches!(
            ProblemInstance::new(1, vec![Arc::new(ZeroOperator), Arc::new(ZeroOperator)], vec![]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
