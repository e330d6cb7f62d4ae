//! Pointwise Hermite-function evaluation and Gauss-Hermite quadrature.
//!
//! The Hermite functions are `h_n(x) = (2^n n! sqrt(pi))^{-1/2} e^{-x^2/2} H_n(x)`,
//! the orthonormal eigenbasis of `x^2 - d^2/dx^2` on `L^2(R, dx)`. Everything
//! in this module is built on the normalized three-term recurrence
//!
//! ```text
//! h_{n+1}(x) = ( x h_n(x) - sqrt(n/2) h_{n-1}(x) ) / sqrt((n+1)/2),
//! ```
//!
//! never on the raw polynomials `H_n`, which overflow around `n = 150`.
//!
//! The recurrence is run in a scaled representation `(mantissa, 2^exp)`
//! because `h_0(x) = pi^{-1/4} e^{-x^2/2}` underflows `f64` for `|x| > 38`
//! while high-order nodes of the quadrature rules sit beyond `|x| = 45`;
//! starting the recurrence from an underflowed zero would lose the large-`n`
//! values that the Christoffel weights depend on.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::space::RealCoeffVec;

const LN_2: f64 = std::f64::consts::LN_2;

/// `2^e` as an exact `f64` scale factor, split so that subnormal and huge
/// exponents multiply in range-safe stages.
fn pow2(e: i64) -> f64 {
    if (-1022..=1023).contains(&e) {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e < -1074 {
        0.0
    } else if e < -1022 {
        // subnormal range, go through two exact steps
        pow2(-1022) * pow2(e + 1022)
    } else {
        f64::INFINITY
    }
}

/// `m * 2^e` through range-safe chunks, so a mantissa far from 1 still
/// reaches the subnormal range instead of flushing to zero.
fn ldexp(mut m: f64, mut e: i64) -> f64 {
    while e > 1000 {
        m *= pow2(1000);
        e -= 1000;
        if !m.is_finite() {
            return m;
        }
    }
    while e < -1000 {
        m *= pow2(-1000);
        e += 1000;
        if m == 0.0 {
            return 0.0;
        }
    }
    m * pow2(e)
}

/// Scaled recurrence state at a fixed point: `h_{n-1} = prev * 2^exp2`,
/// `h_n = cur * 2^exp2`.
struct ScaledPair {
    x: f64,
    n: usize,
    prev: f64,
    cur: f64,
    exp2: i64,
}

impl ScaledPair {
    fn start(x: f64) -> Self {
        // h_0 = pi^{-1/4} e^{-x^2/2}, stored as log2 to survive |x| ~ 45
        let l0 = -0.5 * x * x - 0.25 * std::f64::consts::PI.ln();
        let exp2 = (l0 / LN_2).floor() as i64;
        let cur = (l0 - exp2 as f64 * LN_2).exp();
        ScaledPair {
            x,
            n: 0,
            prev: 0.0,
            cur,
            exp2,
        }
    }

    /// Advance from degree `n` to `n + 1`, rescaling as needed.
    fn step(&mut self) {
        let n = self.n as f64;
        let next = (self.x * self.cur - (n / 2.0).sqrt() * self.prev) / ((n + 1.0) / 2.0).sqrt();
        self.prev = self.cur;
        self.cur = next;
        self.n += 1;
        let m = self.prev.abs().max(self.cur.abs());
        if m > pow2(500) {
            self.prev *= pow2(-512);
            self.cur *= pow2(-512);
            self.exp2 += 512;
        } else if m > 0.0 && m < pow2(-500) {
            self.prev *= pow2(512);
            self.cur *= pow2(512);
            self.exp2 -= 512;
        }
    }

    /// Current `h_n(x)` as a plain `f64` (graceful underflow to zero).
    fn value(&self) -> f64 {
        ldexp(self.cur, self.exp2)
    }
}

/// Evaluate the Hermite function `h_n(x)`.
///
/// Total on finite inputs; values below the `f64` range come back as `0.0`
/// and nothing overflows for `|x| <= 40`, `n <= 4096` (or well beyond).
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut pair = ScaledPair::start(x);
    for _ in 0..n {
        pair.step();
    }
    pair.value()
}

/// `h_0(x), ..., h_{n_max}(x)` in one recurrence pass.
pub fn hermite_values(n_max: usize, x: f64) -> Vec<f64> {
    let mut pair = ScaledPair::start(x);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(pair.value());
    for _ in 0..n_max {
        pair.step();
        out.push(pair.value());
    }
    out
}

/// `sum_{k < m} h_k(x)^2`, accumulated in the scaled representation.
///
/// The reciprocal is the plain-measure Gauss-Hermite weight at a node of
/// `h_m` (Christoffel function of the orthonormal polynomial family).
fn christoffel_sum(m: usize, x: f64) -> f64 {
    let mut pair = ScaledPair::start(x);
    let mut s = 0.0f64;
    let mut s_exp2 = 2 * pair.exp2;
    for k in 0..m {
        let t_rel = 2 * pair.exp2 - s_exp2;
        if t_rel > 512 {
            s = s * pow2(-t_rel) + pair.cur * pair.cur;
            s_exp2 = 2 * pair.exp2;
        } else if t_rel >= -512 {
            s += pair.cur * pair.cur * pow2(t_rel);
        }
        // contributions more than 2^-512 below the running scale are lost to
        // the sum anyway
        if s > pow2(500) {
            s *= pow2(-512);
            s_exp2 += 512;
        }
        if k + 1 < m {
            pair.step();
        }
    }
    ldexp(s, s_exp2)
}

/// A Gauss-Hermite rule: `order` nodes of `h_order`, with weights for both
/// the Gaussian measure `e^{-x^2} dx` (raw) and the plain measure `dx`
/// (reweighted).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights_raw: Vec<f64>,
    weights_plain: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Strictly increasing abscissae.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights for integrals against `e^{-x^2} dx`; they sum to `sqrt(pi)`.
    pub fn weights_raw(&self) -> &[f64] {
        &self.weights_raw
    }

    /// Weights for plain `dx` integrals of Schwartz-class integrands.
    pub fn weights_plain(&self) -> &[f64] {
        &self.weights_plain
    }

    /// `integral of f(x) e^{-x^2} dx` over the real line.
    pub fn integrate_gaussian<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights_raw)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `integral of g(x) dx` for `g` decaying like the Hermite functions.
    pub fn integrate_plain<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights_plain)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// Build the Gauss-Hermite rule of the given order.
///
/// Nodes are eigenvalues of the symmetric tridiagonal Jacobi matrix with
/// off-diagonal `sqrt(k/2)` (Golub-Welsch), polished by one Newton step on
/// `h_order`; plain weights are reciprocal Christoffel sums, raw weights the
/// same times `e^{-x^2}`.
pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    assert!(order >= 1, "quadrature order must be at least 1");
    let mut nodes = if order == 1 {
        vec![0.0]
    } else {
        let jac = nalgebra::DMatrix::<f64>::from_fn(order, order, |i, j| {
            if i + 1 == j {
                (j as f64 / 2.0).sqrt()
            } else if j + 1 == i {
                (i as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = jac
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("Jacobi matrix eigensolve did not converge".into()))?;
        let mut xs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigen("non-finite Jacobi eigenvalue".into()));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs
    };

    // One Newton step on h_order: h_m' = sqrt(2m) h_{m-1} - x h_m, evaluated
    // on the shared scale so the ratio is exact.
    for x in nodes.iter_mut() {
        let mut pair = ScaledPair::start(*x);
        for _ in 0..order {
            pair.step();
        }
        let deriv = (2.0 * order as f64).sqrt() * pair.prev - *x * pair.cur;
        if deriv != 0.0 {
            *x -= pair.cur / deriv;
        }
    }
    // enforce the exact even symmetry of the node set
    for j in 0..order / 2 {
        let s = 0.5 * (nodes[j] - nodes[order - 1 - j]);
        nodes[j] = s;
        nodes[order - 1 - j] = -s;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }

    let mut weights_plain = Vec::with_capacity(order);
    let mut weights_raw = Vec::with_capacity(order);
    for &x in &nodes {
        let wp = 1.0 / christoffel_sum(order, x);
        weights_plain.push(wp);
        weights_raw.push(wp * (-x * x).exp());
    }
    Ok(QuadratureRule {
        order,
        nodes,
        weights_raw,
        weights_plain,
    })
}

/// Process-wide cache of quadrature rules keyed by order. Sampled-multiplier
/// compressions rebuild the same high-order rule repeatedly; the eigensolve
/// behind it is the expensive part.
pub(crate) fn cached_rule(order: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&order) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(gauss_hermite(order)?);
    Ok(Arc::clone(
        cache.lock().unwrap().entry(order).or_insert(rule),
    ))
}

/// Table of `h_n(x_j)` for `n <= n_max` over a fixed point set.
#[derive(Debug, Clone)]
pub struct HermiteEvalTable {
    n_max: usize,
    x_points: Vec<f64>,
    /// `values[n][j] = h_n(x_j)`
    values: Vec<Vec<f64>>,
}

impl HermiteEvalTable {
    pub fn new(n_max: usize, x_points: &[f64]) -> Self {
        let mut values = vec![vec![0.0; x_points.len()]; n_max + 1];
        for (j, &x) in x_points.iter().enumerate() {
            for (n, v) in hermite_values(n_max, x).into_iter().enumerate() {
                values[n][j] = v;
            }
        }
        HermiteEvalTable {
            n_max,
            x_points: x_points.to_vec(),
            values,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn x_points(&self) -> &[f64] {
        &self.x_points
    }

    /// Row `h_n(x_0), ..., h_n(x_last)`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n]
    }
}

/// Project a pointwise function onto the first `n_basis` Hermite functions:
/// coefficient `k` is the quadrature value of `integral f h_k dx`.
///
/// Requires `rule.order >= 2 * n_basis`: degree counting for polynomial
/// integrands, with slack for the smooth non-polynomial multipliers this is
/// used on.
pub fn project<F: Fn(f64) -> f64>(
    f: F,
    n_basis: usize,
    rule: &QuadratureRule,
) -> Result<RealCoeffVec> {
    if rule.order < 2 * n_basis {
        return Err(Error::QuadratureTooSmall {
            order: rule.order,
            required: 2 * n_basis,
        });
    }
    let table = HermiteEvalTable::new(n_basis.saturating_sub(1), rule.nodes());
    let fw: Vec<f64> = rule
        .nodes()
        .iter()
        .zip(rule.weights_plain())
        .map(|(&x, &w)| w * f(x))
        .collect();
    let coeffs: Vec<f64> = (0..n_basis)
        .map(|k| table.row(k).iter().zip(&fw).map(|(&h, &g)| h * g).sum())
        .collect();
    Ok(RealCoeffVec::from_coeffs(coeffs))
}

/// Evaluate a coefficient vector pointwise: `sum_k c_k h_k(x)`.
pub fn synthesize(c: &RealCoeffVec, x: f64) -> f64 {
    if c.support() == 0 {
        return 0.0;
    }
    let h = hermite_values(c.support() - 1, x);
    c.coeffs()[..c.support()]
        .iter()
        .zip(&h)
        .map(|(&a, &b)| a * b)
        .sum()
}
