//! The monotonicity quadratic form `M_p(phi) = 2 <phi, L* phi>_p + ||A* phi||_p^2`
//! and the machinery that certifies its boundedness numerically.
//!
//! Restricted to the span of the first `K` Hermite modes the form is
//! `phi^T Q phi` with a symmetric matrix `Q`, and the smallest admissible
//! constant on that subspace is the largest generalized eigenvalue of
//! `(Q, G_p)` with the diagonal Gram matrix `G_p = diag((2n+1)^{2p})`. Since
//! the subspaces are nested, those eigenvalues are nondecreasing in `K`; a
//! plateau as `K` doubles is the numerical signature of a finite constant in
//! the inequality.
//!
//! Sections at different `K` are always cut from one ambient assembly, so
//! the nesting is literal: the same matrix, growing principal blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermite::QuadratureRule;
use crate::operators::{
    a_star, derivative_op, l_star, position_op, BandedOp, Growth, MultiplierSpec,
};
use crate::space::{eigen_power_real, hermite_power_real, inner_p, RealCoeffVec};

/// A monotonicity-inequality instance: diffusion multiplier, drift
/// multiplier, Sobolev index.
#[derive(Debug, Clone)]
pub struct MonoProblem {
    pub sigma: MultiplierSpec,
    pub b: MultiplierSpec,
    pub p: f64,
}

impl MonoProblem {
    pub fn new(sigma: MultiplierSpec, b: MultiplierSpec, p: f64) -> Self {
        MonoProblem { sigma, b, p }
    }

    /// Ambient margin that keeps a support-`K` section spill-free under both
    /// operators of the form.
    pub fn growth_margin(&self) -> usize {
        let ds = self.sigma.degree();
        let db = self.b.degree();
        match (ds, db) {
            (Some(ds), Some(db)) => (2 + 2 * ds).max(1 + db).max(1 + ds),
            // sampled multipliers are dense compressions; the margin only
            // needs to cover the polynomial side
            (Some(ds), None) => (2 + 2 * ds).max(4),
            (None, Some(db)) => (1 + db).max(4),
            (None, None) => 4,
        }
    }
}

/// Evaluate `M_p(phi)` directly on a coefficient vector.
///
/// Exact at truncation for polynomial multipliers; `phi.alloc()` must cover
/// the support plus the band growth or the application spills.
pub fn mono_form(prob: &MonoProblem, phi: &RealCoeffVec) -> Result<f64> {
    let n = phi.alloc();
    let a = a_star(&prob.sigma, n)?;
    let l = l_star(&prob.sigma, &prob.b, n)?;
    let l_phi = l.apply(phi)?;
    let a_phi = a.apply(phi)?;
    Ok(2.0 * inner_p(phi, &l_phi, prob.p) + inner_p(&a_phi, &a_phi, prob.p))
}

/// Independent `p = 0` oracle by integration by parts:
/// `M_0(phi) = integral ((sigma')^2 - b') phi^2 dx`.
///
/// Derivatives are analytic for affine multipliers; sampled multipliers use
/// central differences with step `cbrt(eps) (1 + |x|)` and must carry their
/// derivative-bound metadata. Polynomials of degree two or more have
/// unbounded derivatives and are rejected: they are outside the multiplier
/// class of the inequality.
pub fn mono_p0_oracle(
    sigma: &MultiplierSpec,
    b: &MultiplierSpec,
    phi: &RealCoeffVec,
    rule: &QuadratureRule,
) -> Result<f64> {
    for spec in [sigma, b] {
        if let Some(degree) = spec.degree() {
            if degree >= 2 {
                return Err(Error::UnboundedDerivative { degree });
            }
        }
    }
    let deg_terms = sigma.degree().unwrap_or(1).max(b.degree().unwrap_or(1));
    let required = 2 * phi.support() + deg_terms;
    if rule.order() < required {
        return Err(Error::QuadratureTooSmall {
            order: rule.order(),
            required,
        });
    }
    let d_sigma = derivative_of(sigma)?;
    let d_b = derivative_of(b)?;
    let table =
        crate::hermite::HermiteEvalTable::new(phi.support().saturating_sub(1), rule.nodes());
    let mut total = 0.0;
    for (j, (&x, &w)) in rule.nodes().iter().zip(rule.weights_plain()).enumerate() {
        let mut val = 0.0;
        for k in 0..phi.support() {
            val += phi.coeffs()[k] * table.row(k)[j];
        }
        let sp = d_sigma(x);
        total += w * (sp * sp - d_b(x)) * val * val;
    }
    Ok(total)
}

fn derivative_of(spec: &MultiplierSpec) -> Result<Box<dyn Fn(f64) -> f64 + '_>> {
    if let Some(d) = spec.derivative_poly() {
        return Ok(Box::new(move |x| d.eval(x)));
    }
    match spec {
        MultiplierSpec::Sampled {
            f,
            label,
            derivative_bound,
            ..
        } => {
            if derivative_bound.is_none() {
                return Err(Error::MissingDerivativeBound(label.clone()));
            }
            let f = f.clone();
            let h0 = f64::EPSILON.cbrt();
            Ok(Box::new(move |x| {
                let h = h0 * (1.0 + x.abs());
                (f(x + h) - f(x - h)) / (2.0 * h)
            }))
        }
        _ => unreachable!("polynomial kinds have analytic derivatives"),
    }
}

/// The `A*` and `L*` matrices of a problem at a fixed allocation, built once
/// and shared across Sobolev indices.
pub struct OperatorSet {
    pub a: BandedOp,
    pub l: BandedOp,
    n: usize,
    margin: usize,
}

impl OperatorSet {
    pub fn assemble(prob: &MonoProblem, n: usize) -> Result<OperatorSet> {
        Ok(OperatorSet {
            a: a_star(&prob.sigma, n)?,
            l: l_star(&prob.sigma, &prob.b, n)?,
            n,
            margin: prob.growth_margin(),
        })
    }

    /// Largest section that is spill-free at this allocation.
    pub fn max_section(&self) -> usize {
        self.n - self.margin
    }

    /// Assemble the ambient form matrix for one Sobolev index. Sections of
    /// the result share the assembly, which keeps `lambda_max(K)` literally
    /// nested across `K`.
    pub fn form(&self, p: f64) -> FormMatrix {
        let n = self.n;
        let g: Vec<f64> = (0..n).map(|i| eigen_power_real(i, 2.0 * p)).collect();
        // G L
        let mut gl = self.l.matrix().clone();
        for i in 0..n {
            let gi = g[i];
            for j in 0..n {
                gl[(i, j)] *= gi;
            }
        }
        // G A (then Q = GL + (GL)^T + A^T (G A))
        let mut ga = self.a.matrix().clone();
        for i in 0..n {
            let gi = g[i];
            for j in 0..n {
                ga[(i, j)] *= gi;
            }
        }
        let mut q = self.a.matrix().transpose() * ga;
        q += &gl.transpose();
        q += gl;
        FormMatrix {
            q,
            g,
            margin: self.margin,
        }
    }

    /// The form matrix `Q = G_p L + L^T G_p + A^T G_p A` cut to its leading
    /// `k x k` block, together with the Gram diagonal.
    pub fn form_matrix(&self, p: f64, k: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.form(p).section(k)
    }

    /// Largest generalized eigenvalue of `(Q, G_p)` on the `k`-section.
    pub fn best_constant(&self, p: f64, k: usize) -> Result<f64> {
        self.form(p).best_constant(k)
    }
}

/// Ambient form matrix of one problem at one Sobolev index.
pub struct FormMatrix {
    q: DMatrix<f64>,
    g: Vec<f64>,
    margin: usize,
}

impl FormMatrix {
    /// Spill-free `k x k` block and its Gram diagonal.
    pub fn section(&self, k: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if k + self.margin > self.q.nrows() {
            return Err(Error::AllocTooSmall {
                alloc: self.q.nrows(),
                required: k + self.margin,
            });
        }
        let q_k = self.q.view((0, 0), (k, k)).into_owned();
        let q_k = (q_k.transpose() + &q_k) * 0.5;
        let g_k = DVector::from_iterator(k, self.g.iter().copied().take(k));
        Ok((q_k, g_k))
    }

    /// Largest generalized eigenvalue of `(Q, G_p)` on the `k`-section, via
    /// the symmetric-definite reduction `G^{-1/2} Q G^{-1/2}`.
    pub fn best_constant(&self, k: usize) -> Result<f64> {
        let (q, g) = self.section(k)?;
        let mut b = q;
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] /= g[i].sqrt() * g[j].sqrt();
            }
        }
        let eig = b
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("symmetric eigensolve did not converge".into()))?;
        let lam = eig
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        if !lam.is_finite() {
            return Err(Error::Eigen("non-finite eigenvalue".into()));
        }
        Ok(lam)
    }
}

/// The form matrix restricted to `span{h_0 .. h_{K-1}}` at ambient
/// allocation `n`.
pub fn assemble_form_matrix(
    prob: &MonoProblem,
    k: usize,
    n: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    OperatorSet::assemble(prob, n)?.form_matrix(prob.p, k)
}

/// The smallest admissible constant on the `K`-dimensional truncation.
pub fn best_constant(prob: &MonoProblem, k: usize) -> Result<f64> {
    let n = k + prob.growth_margin();
    OperatorSet::assemble(prob, n)?.best_constant(prob.p, k)
}

/// Outcome of a plateau sweep over growing truncations.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub p: f64,
    /// `(K, lambda_max(K))` per schedule entry, nondecreasing in `K`.
    pub lambda_by_k: Vec<(usize, f64)>,
    /// Constant estimate: the last eigenvalue.
    pub plateau: f64,
    /// `|lambda(K_last) - lambda(K_last/2)| <= tol * max(1, |lambda|)`,
    /// with the reference taken at the largest scheduled `K <= K_last/2`.
    pub converged: bool,
    pub tol: f64,
}

/// Sweep `lambda_max(K)` over the schedule, assembling the operators once at
/// the largest allocation so the sections are literally nested.
pub fn plateau_sweep(prob: &MonoProblem, ks: &[usize], tol: f64) -> Result<MonotonicityReport> {
    assert!(!ks.is_empty(), "schedule must be nonempty");
    assert!(
        ks.windows(2).all(|w| w[0] < w[1]),
        "schedule must be strictly increasing"
    );
    assert!(tol > 0.0, "tolerance must be positive");
    let k_max = *ks.last().unwrap();
    let ops = OperatorSet::assemble(prob, k_max + prob.growth_margin())?;
    let form = ops.form(prob.p);
    let mut lambda_by_k = Vec::with_capacity(ks.len());
    for &k in ks {
        lambda_by_k.push((k, form.best_constant(k)?));
    }
    let plateau = lambda_by_k.last().unwrap().1;
    let reference = lambda_by_k
        .iter()
        .rev()
        .find(|(k, _)| *k <= k_max / 2)
        .map(|&(_, lam)| lam);
    let converged = match reference {
        Some(prev) => (plateau - prev).abs() <= tol * plateau.abs().max(1.0),
        None => false,
    };
    Ok(MonotonicityReport {
        p: prob.p,
        lambda_by_k,
        plateau,
        converged,
        tol,
    })
}

/// Defect of the spectral-versus-banded power identity: applies the banded
/// `(X^2 - D^2)` matrix `p` times and compares with the diagonal
/// `(2n+1)^p` action. Needs `alloc >= support + 2p`.
pub fn hermite_power_identity_check(p: u32, phi: &RealCoeffVec) -> Result<f64> {
    let n = phi.alloc();
    let x = position_op(n);
    let d = derivative_op(n);
    // diagonal in exact arithmetic, but each application still consumes the
    // band-growth margin of its x^2 and d^2 parts
    let h_banded = x
        .compose(&x)
        .sub(&d.compose(&d))
        .with_growth(Growth::Banded(2));
    let mut banded = phi.clone();
    for _ in 0..p {
        banded = h_banded.apply(&banded)?;
    }
    let spectral = hermite_power_real(p as f64, phi);
    let mut diff2 = 0.0;
    for i in 0..n {
        let d = banded.coeffs()[i] - spectral.coeffs().get(i).copied().unwrap_or(0.0);
        diff2 += d * d;
    }
    Ok(diff2.sqrt())
}
