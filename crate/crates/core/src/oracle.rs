//! Product-space reference for the generic iteration.
//!
//! On `H^{2n-1} = H^n x H^{n-1}` the iteration is a relaxed proximal point
//! method for `A + B` preconditioned by
//!
//! ```text
//! M = [ L'   Z ]        C = [ Z ]        M = C C^T
//!     [ Z^T  I ]            [ I ]
//! ```
//!
//! with `L' = Lap(G')`. The lifted operators are
//!
//! ```text
//! A = [ tau A_D + P(G \ G') + Q(G')   -Z ]      B = [ tau B_D + (tau/(4 beta)) P(G)   0 ]
//!     [ Z^T                            0 ]          [ 0                               0 ]
//! ```
//!
//! where `A_D = diag(A_1, .., A_n)`, `B_D(x) = [0, B_1(x_{p(2)}), .., B_{n-1}(x_{p(n)})]`
//! and `tau = 4 beta gamma / (4 beta - gamma)`. Every matrix acts blockwise
//! (Kronecker product with the identity on `R^d`); nothing of size
//! `(2n-1) d` is ever formed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{structure_matrices, GraphTriple};
use crate::operators::{ProblemInstance, Vector};
use crate::solver::ResolventProbe;

/// Tolerance of the build-time identity checks.
const IDENTITY_TOL: f64 = 1e-10;

/// The lifted operators for one problem, triple and stepsize.
#[derive(Debug, Clone)]
pub struct ProductOperatorBundle {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub beta: f64,
    /// `4 beta gamma / (4 beta - gamma)`.
    pub tau: f64,
    /// `Lap(G')`.
    pub l_prime: DMatrix<f64>,
    pub z: DMatrix<f64>,
    /// The `(2n-1) x (2n-1)` coefficient pattern of `M`.
    pub m: DMatrix<f64>,
    /// The `(2n-1) x (n-1)` coefficient pattern of `C`.
    pub c: DMatrix<f64>,
    /// `P` of the complementary subgraph `G \ G'`.
    pub p_bar: DMatrix<f64>,
    /// `Q(G')`.
    pub q: DMatrix<f64>,
    /// `P(G)`.
    pub r: DMatrix<f64>,
    degrees: Vec<f64>,
    pred: Vec<usize>,
    /// One-based sources of the `G` in-edges of each node.
    in_neighbors: Vec<Vec<usize>>,
    prob: ProblemInstance,
}

/// Builds the bundle and checks `M = C C^T`, `M` positive semidefinite and
/// `L' + P(G \ G') + Q(G') + (tau/(4 beta)) P(G) = (1 + tau/(4 beta)) P(G)`.
pub fn build_bundle(
    prob: &ProblemInstance,
    triple: &GraphTriple,
    gamma: f64,
) -> Result<ProductOperatorBundle> {
    let beta = prob.beta();
    let upper = 4.0 * beta;
    if !(gamma > 0.0 && gamma < upper) {
        return Err(Error::StepsizeOutOfRange {
            value: gamma,
            upper,
        });
    }
    let n = triple.order();
    if prob.order() != n {
        return Err(Error::DimensionMismatch {
            what: "operator count vs graph order",
            expected: n,
            found: prob.order(),
        });
    }
    let tau = 4.0 * beta * gamma / (4.0 * beta - gamma);
    let g = triple.graph();
    let gm = structure_matrices(g);
    let gpm = structure_matrices(triple.laplacian_subgraph());
    let complement = g.complement_subgraph(triple.laplacian_subgraph())?;
    let p_bar = structure_matrices(&complement).p;
    let z = triple.onto().clone();
    let l_prime = gpm.laplacian;

    let mut m = DMatrix::zeros(2 * n - 1, 2 * n - 1);
    m.view_mut((0, 0), (n, n)).copy_from(&l_prime);
    m.view_mut((0, n), (n, n - 1)).copy_from(&z);
    m.view_mut((n, 0), (n - 1, n)).copy_from(&z.transpose());
    m.view_mut((n, n), (n - 1, n - 1)).fill_with_identity();
    let mut c = DMatrix::zeros(2 * n - 1, n - 1);
    c.view_mut((0, 0), (n, n - 1)).copy_from(&z);
    c.view_mut((n, 0), (n - 1, n - 1)).fill_with_identity();

    let cct = (&m - &c * c.transpose()).amax();
    if cct > IDENTITY_TOL {
        return Err(Error::IdentityViolation {
            what: "M = C C^T",
            deviation: cct,
        });
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min_eig < -1e-9 {
        return Err(Error::IdentityViolation {
            what: "M positive semidefinite",
            deviation: -min_eig,
        });
    }
    let s = tau / (4.0 * beta);
    let lhs = &l_prime + &p_bar + &gpm.q + &gm.p * s;
    let rhs = &gm.p * (1.0 + s);
    let dev = (lhs - rhs).amax();
    if dev > IDENTITY_TOL * (1.0 + s) {
        return Err(Error::IdentityViolation {
            what: "L' + P_bar + Q + (tau/(4 beta)) R = (1 + tau/(4 beta)) P(G)",
            deviation: dev,
        });
    }

    Ok(ProductOperatorBundle {
        n,
        d: prob.dim(),
        gamma,
        beta,
        tau,
        l_prime,
        z,
        m,
        c,
        p_bar,
        q: gpm.q,
        r: gm.p,
        degrees: triple.degrees().to_vec(),
        pred: triple.predecessors().to_vec(),
        in_neighbors: (1..=n).map(|i| g.in_neighbors(i)).collect(),
        prob: prob.clone(),
    })
}

/// `(mat kron I_d) x` for block vectors.
pub fn apply_blockwise(mat: &DMatrix<f64>, x: &[Vector]) -> Vec<Vector> {
    let d = x.first().map_or(0, |v| v.len());
    (0..mat.nrows())
        .map(|i| {
            let mut out = Vector::zeros(d);
            for (j, xj) in x.iter().enumerate() {
                let a = mat[(i, j)];
                if a != 0.0 {
                    out.axpy(a, xj, 1.0);
                }
            }
            out
        })
        .collect()
}

/// Dense `mat kron I_d`, for small test sizes only.
pub fn kron_identity(mat: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(mat.nrows() * d, mat.ncols() * d, |r, c| {
        if r % d == c % d {
            mat[(r / d, c / d)]
        } else {
            0.0
        }
    })
}

/// Output of [`inverse_step`], with the resolvent calls that produced `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseStep {
    pub x: Vec<Vector>,
    pub v: Vec<Vector>,
    pub probes: Vec<ResolventProbe>,
}

impl ProductOperatorBundle {
    pub fn problem(&self) -> &ProblemInstance {
        &self.prob
    }

    /// `B_D(x) = [0, B_1(x_{p(2)}), .., B_{n-1}(x_{p(n)})]`.
    pub fn forward_diag(&self, x: &[Vector]) -> Vec<Vector> {
        let mut out = vec![Vector::zeros(self.d)];
        for i in 2..=self.n {
            let p = self.pred[i - 2];
            out.push(self.prob.forward(i - 1).apply(&x[p - 1]));
        }
        out
    }

    /// The `H^n` block of the lifted `B`: `tau B_D(x) + (tau/(4 beta)) (R kron I) x`.
    pub fn lifted_forward(&self, x: &[Vector]) -> Vec<Vector> {
        let s = self.tau / (4.0 * self.beta);
        let rx = apply_blockwise(&self.r, x);
        self.forward_diag(x)
            .into_iter()
            .zip(rx)
            .map(|(b, r)| b * self.tau + r * s)
            .collect()
    }

    /// Residual of the inclusion `z in (L' + P_bar + Q + (tau/(4 beta)) R) x
    /// + tau A_D(x) + tau B_D(x)`, with the `A_i` selections read off the
    /// resolvent calls. Zero (up to rounding) for the output of [`inverse_step`].
    pub fn inclusion_residual(&self, z: &[Vector], step: &InverseStep) -> f64 {
        let s = self.tau / (4.0 * self.beta);
        let lin = &self.l_prime + &self.p_bar + &self.q + &self.r * s;
        let lx = apply_blockwise(&lin, &step.x);
        let bx = self.forward_diag(&step.x);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let probe = &step.probes[i];
            let a = (&probe.argument - &step.x[i]) / probe.sigma;
            let r = &z[i] - &lx[i] - (&a + &bx[i]) * self.tau;
            worst = worst.max(r.amax());
        }
        worst
    }
}

/// `(x, v) = (M + A + B)^{-1} (z, y)`, computed with the resolvent formulas
///
/// ```text
/// x_1 = J_{(gamma/d_1) A_1}( gamma/(tau d_1) z_1 )
/// x_i = J_{(gamma/d_i) A_i}( (2/d_i) sum_{(h,i) in G} x_h - (gamma/d_i) B_{i-1}(x_{p(i)}) + gamma/(tau d_i) z_i )
/// v   = y - 2 Z^T x
/// ```
pub fn inverse_step(bundle: &ProductOperatorBundle, z: &[Vector], y: &[Vector]) -> InverseStep {
    let n = bundle.n;
    let gamma = bundle.gamma;
    let mut x: Vec<Vector> = Vec::with_capacity(n);
    let mut probes = Vec::with_capacity(n);
    for i in 1..=n {
        let di = bundle.degrees[i - 1];
        let mut arg = &z[i - 1] * (gamma / (bundle.tau * di));
        if i > 1 {
            for &h in &bundle.in_neighbors[i - 1] {
                arg.axpy(2.0 / di, &x[h - 1], 1.0);
            }
            let p = bundle.pred[i - 2];
            let b = bundle.prob.forward(i - 1).apply(&x[p - 1]);
            arg.axpy(-gamma / di, &b, 1.0);
        }
        let sigma = gamma / di;
        x.push(bundle.prob.resolvent(i).resolve(sigma, &arg));
        probes.push(ResolventProbe {
            sigma,
            argument: arg,
        });
    }
    let ztx = apply_blockwise(&bundle.z.transpose(), &x);
    let v = y.iter().zip(&ztx).map(|(y, t)| y - t * 2.0).collect();
    InverseStep { x, v, probes }
}

/// One reduced proximal point step `y+ = y + mu (C^T (M + A + B)^{-1} C y - y)`.
/// Returns `y+` and the inner `(x, v)`.
pub fn rppa_iterate(bundle: &ProductOperatorBundle, y: &[Vector], mu: f64) -> (Vec<Vector>, InverseStep) {
    let cy = apply_blockwise(&bundle.c, y);
    let (z, yy) = cy.split_at(bundle.n);
    let inner = inverse_step(bundle, z, yy);
    let mut stacked = inner.x.clone();
    stacked.extend(inner.v.iter().cloned());
    let ct = apply_blockwise(&bundle.c.transpose(), &stacked);
    let next = y
        .iter()
        .zip(&ct)
        .map(|(y, c)| y + (c - y) * mu)
        .collect();
    (next, inner)
}

/// Outcome of [`check_zero`].
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroReport {
    /// `|| sum_i a_i + sum_j b_j ||` with `a_i in A_i(x_i)` and `b_j = B_j(x*)`.
    pub certificate_norm: f64,
    /// `max_i || x_i - x* ||` for the points `x_i` at which the selections were taken.
    pub selection_gap: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Zero certificate for a candidate solution `x_star`.
///
/// With `probes` (the resolvent calls of the final iteration) each selection
/// is `a_i = (v_i - J(v_i)) / sigma_i`, taken at `J(v_i)`. Without them every
/// resolvent is probed at `v_i = x_star` with `sigma = gamma`; an infeasible
/// candidate is then moved by some projection and the gap exposes it.
pub fn check_zero(
    x_star: &Vector,
    prob: &ProblemInstance,
    gamma: f64,
    probes: Option<&[ResolventProbe]>,
    tol: f64,
) -> ZeroReport {
    let n = prob.order();
    let mut total = Vector::zeros(prob.dim());
    let mut gap = 0.0f64;
    for i in 1..=n {
        let (sigma, v) = match probes {
            Some(p) => (p[i - 1].sigma, p[i - 1].argument.clone()),
            None => (gamma, x_star.clone()),
        };
        let (xi, a) = crate::operators::residual_element(prob.resolvent(i), sigma, &v);
        gap = gap.max((&xi - x_star).norm());
        total += a;
    }
    for j in 1..n {
        total += prob.forward(j).apply(x_star);
    }
    let certificate_norm = total.norm();
    ZeroReport {
        certificate_norm,
        selection_gap: gap,
        tol,
        passed: certificate_norm < tol && gap < tol,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub trials: usize,
    /// Smallest `<B(x) - B(x'), x - x'>` over the sampled pairs.
    pub min_slack: f64,
    pub passed: bool,
}

/// Samples `<tau Db + (tau/(4 beta)) R Dx, Dx> >= 0` on random pairs in `[-2, 2]`.
pub fn monotonicity_sample<R: Rng + ?Sized>(
    bundle: &ProductOperatorBundle,
    trials: usize,
    rng: &mut R,
) -> MonotonicityReport {
    let mut min_slack = f64::INFINITY;
    let sample = |rng: &mut R| -> Vec<Vector> {
        (0..bundle.n)
            .map(|_| crate::sampling::uniform_vector(rng, bundle.d, 2.0))
            .collect()
    };
    for _ in 0..trials {
        let x = sample(rng);
        let xp = sample(rng);
        min_slack = min_slack.min(lifted_slack(bundle, &x, &xp));
    }
    MonotonicityReport {
        trials,
        min_slack,
        passed: min_slack >= -1e-9,
    }
}

/// `<B(x) - B(x'), x - x'>` on the `H^n` block.
pub fn lifted_slack(bundle: &ProductOperatorBundle, x: &[Vector], xp: &[Vector]) -> f64 {
    let bx = bundle.lifted_forward(x);
    let bxp = bundle.lifted_forward(xp);
    bx.iter()
        .zip(&bxp)
        .zip(x.iter().zip(xp))
        .map(|((b, bp), (x, xp))| (b - bp).dot(&(x - xp)))
        .sum()
}

/// Inner product and squared distance of the lifted `B` on the pair
/// `[x, 0, 0]`, `[0, x, 0]`, for `n = 2`, `B_1 = Id`, `beta = 1`, `gamma = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub inner: f64,
    pub norm_sq: f64,
    /// `2 ||x||^2`.
    pub expected_norm_sq: f64,
}

/// The lifted `B` is monotone but not cocoercive: this pair has zero inner
/// product and nonzero image distance.
pub fn noncocoercivity_witness(x: &Vector) -> Result<Witness> {
    use crate::graph::Preset;
    use crate::operators::{Forward, QuadraticGradient, Resolvent, ZeroOperator};
    use std::sync::Arc;

    let d = x.len();
    let prob = ProblemInstance::new(
        d,
        vec![Arc::new(ZeroOperator) as Arc<dyn Resolvent>, Arc::new(ZeroOperator)],
        vec![Arc::new(QuadraticGradient::with_beta(DMatrix::identity(d, d), 1.0)?) as Arc<dyn Forward>],
    )?;
    let bundle = build_bundle(&prob, &Preset::DavisYin.triple(2)?, 2.0)?;
    let zero = Vector::zeros(d);
    let p = [x.clone(), zero.clone()];
    let q = [zero.clone(), x.clone()];
    // the H^{n-1} block of both points and of both images is zero
    let bp = bundle.lifted_forward(&p);
    let bq = bundle.lifted_forward(&q);
    let mut inner = 0.0;
    let mut norm_sq = 0.0;
    for i in 0..2 {
        let db = &bp[i] - &bq[i];
        inner += db.dot(&(&p[i] - &q[i]));
        norm_sq += db.norm_squared();
    }
    Ok(Witness {
        inner,
        norm_sq,
        expected_norm_sq: 2.0 * x.norm_squared(),
    })
}
