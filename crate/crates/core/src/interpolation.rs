//! The three-lines interpolation apparatus.
//!
//! For affine multipliers the function
//!
//! ```text
//! F(z) = 2 <phi, H^{z~} L* H^{-z~} phi>_0 + <H^z A* H^{-z} phi, H^{z~} A* H^{-z~} phi>_0
//! ```
//!
//! (`z~` the conjugate, complex pairings at level zero) is, for real `phi`, a
//! finite sum of exponentials in `z`: entire, and bounded on the closed unit
//! strip. Its boundary suprema `m_0`, `m_1` control the interior through
//! `|F(x+iy)| <= m_0^{1-x} m_1^x`, and `F` at real `z = p` with `phi`
//! replaced by `H^p phi` reproduces the monotonicity form at index `p`. That
//! is how plateau constants at integer indices transport to fractional ones.
//!
//! Boundary suprema here are grid maxima inflated by five percent: a
//! numerical signature, not a certified bound.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::monotonicity::MonoProblem;
use crate::operators::{a_star, l_star, BandedOp, MultiplierSpec};
use crate::space::{hermite_power, inner_p_c, ComplexCoeffVec, RealCoeffVec};

/// Evaluation grid on the closed strip `0 <= Re z <= 1`.
#[derive(Debug, Clone)]
pub struct StripGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    y_half: f64,
}

impl StripGrid {
    /// `nx` points across `[0, 1]` (odd, so `1/2` is on the grid) and `ny`
    /// points across `[-y_half, y_half]` (odd, so `0` is on the grid).
    pub fn new(y_half: f64, nx: usize, ny: usize) -> Self {
        assert!(nx >= 3 && nx % 2 == 1, "nx must be odd and at least 3");
        assert!(ny >= 3 && ny % 2 == 1, "ny must be odd and at least 3");
        assert!(y_half > 0.0);
        let xs = (0..nx).map(|i| i as f64 / (nx - 1) as f64).collect();
        let ys = (0..ny)
            .map(|j| -y_half + 2.0 * y_half * j as f64 / (ny - 1) as f64)
            .collect();
        StripGrid { xs, ys, y_half }
    }

    /// The module default: `Y = 20` with 401 samples covers several
    /// oscillation periods of every `(2n+1)^{iy}` factor up to `n ~ 10^3`.
    pub fn default_grid() -> Self {
        StripGrid::new(20.0, 21, 401)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn y_half(&self) -> f64 {
        self.y_half
    }
}

fn affine_ops(prob: &MonoProblem, n: usize) -> Result<(BandedOp, BandedOp)> {
    match (&prob.sigma, &prob.b) {
        (MultiplierSpec::Affine { .. }, MultiplierSpec::Affine { .. }) => {
            Ok((a_star(&prob.sigma, n)?, l_star(&prob.sigma, &prob.b, n)?))
        }
        _ => Err(Error::AffineRequired("f_eval")),
    }
}

fn f_eval_with(
    a: &BandedOp,
    l: &BandedOp,
    phi: &ComplexCoeffVec,
    z: Complex64,
) -> Result<Complex64> {
    let zb = z.conj();
    // first term: 2 <phi, H^{zb} L H^{-zb} phi>_0
    let inner_l = hermite_power(zb, &l.apply_complex(&hermite_power(-zb, phi))?);
    let t1 = inner_p_c(phi, &inner_l, 0.0) * 2.0;
    // second term: <H^z A H^{-z} phi, H^{zb} A H^{-zb} phi>_0
    let u = hermite_power(z, &a.apply_complex(&hermite_power(-z, phi))?);
    let v = hermite_power(zb, &a.apply_complex(&hermite_power(-zb, phi))?);
    let t2 = inner_p_c(&u, &v, 0.0);
    Ok(t1 + t2)
}

/// Evaluate `F(z)` for an affine problem. Exact at truncation; the
/// allocation must cover the band growth of `L*`.
pub fn f_eval(prob: &MonoProblem, phi: &RealCoeffVec, z: Complex64) -> Result<Complex64> {
    let (a, l) = affine_ops(prob, phi.alloc())?;
    f_eval_with(&a, &l, &phi.embed(), z)
}

/// Grid maxima of `|F|` on the two boundary lines, inflated by a 5% margin.
pub fn boundary_sup(
    prob: &MonoProblem,
    phi: &RealCoeffVec,
    y_half: f64,
    n_samples: usize,
) -> Result<(f64, f64)> {
    assert!(n_samples >= 101, "need at least 101 boundary samples");
    assert!(y_half >= 10.0, "need y range at least [-10, 10]");
    let (a, l) = affine_ops(prob, phi.alloc())?;
    let phic = phi.embed();
    let mut m0 = 0.0f64;
    let mut m1 = 0.0f64;
    for j in 0..n_samples {
        let y = -y_half + 2.0 * y_half * j as f64 / (n_samples - 1) as f64;
        m0 = m0.max(f_eval_with(&a, &l, &phic, Complex64::new(0.0, y))?.norm());
        m1 = m1.max(f_eval_with(&a, &l, &phic, Complex64::new(1.0, y))?.norm());
    }
    Ok((1.05 * m0, 1.05 * m1))
}

/// `F` sampled over a strip grid, with its boundary estimates.
#[derive(Debug, Clone)]
pub struct FProfile {
    pub grid: StripGrid,
    /// `values[i][j] = F(x_i + i y_j)`.
    pub values: Vec<Vec<Complex64>>,
    pub m0: f64,
    pub m1: f64,
}

/// Sample `F` over the grid and estimate the boundary suprema on the same
/// `y`-range.
pub fn f_profile(prob: &MonoProblem, phi: &RealCoeffVec, grid: &StripGrid) -> Result<FProfile> {
    let (a, l) = affine_ops(prob, phi.alloc())?;
    let phic = phi.embed();
    let mut values = Vec::with_capacity(grid.xs.len());
    for &x in &grid.xs {
        let mut row = Vec::with_capacity(grid.ys.len());
        for &y in &grid.ys {
            row.push(f_eval_with(&a, &l, &phic, Complex64::new(x, y))?);
        }
        values.push(row);
    }
    let (m0, m1) = boundary_sup(prob, phi, grid.y_half, grid.ys.len().max(101))?;
    Ok(FProfile {
        grid: grid.clone(),
        values,
        m0,
        m1,
    })
}

/// Result of checking `|F(x+iy)| <= m0^{1-x} m1^x` over the grid.
#[derive(Debug, Clone)]
pub struct ThreeLinesReport {
    pub m0: f64,
    pub m1: f64,
    /// Smallest `bound - |F|` over interior grid points; negative means a
    /// violation.
    pub worst_margin: f64,
    pub worst_at: (f64, f64),
    pub pass: bool,
}

/// Check the interpolation bound at every interior grid point. A violation
/// is reported in the result, not raised as an error.
pub fn three_lines_check(
    prob: &MonoProblem,
    phi: &RealCoeffVec,
    grid: &StripGrid,
) -> Result<ThreeLinesReport> {
    let profile = f_profile(prob, phi, grid)?;
    Ok(three_lines_from_profile(&profile))
}

/// The same check on an existing profile.
pub fn three_lines_from_profile(profile: &FProfile) -> ThreeLinesReport {
    let (m0, m1) = (profile.m0, profile.m1);
    let mut worst_margin = f64::INFINITY;
    let mut worst_at = (0.0, 0.0);
    for (i, &x) in profile.grid.xs.iter().enumerate() {
        if x == 0.0 || x == 1.0 {
            continue;
        }
        for (j, &y) in profile.grid.ys.iter().enumerate() {
            let bound = m0.powf(1.0 - x) * m1.powf(x);
            let margin = bound - profile.values[i][j].norm();
            if margin < worst_margin {
                worst_margin = margin;
                worst_at = (x, y);
            }
        }
    }
    // zero phi: every value and both bounds vanish, a vacuous pass
    if !worst_margin.is_finite() {
        worst_margin = 0.0;
    }
    ThreeLinesReport {
        m0,
        m1,
        worst_margin,
        worst_at,
        pass: worst_margin >= -1e-12,
    }
}

/// Discrete Cauchy-Riemann residual `|dF/dx + i dF/dy|` at `z` by central
/// differences with step `h`; an analyticity proxy for the sampled `F`.
pub fn cauchy_riemann_residual(
    prob: &MonoProblem,
    phi: &RealCoeffVec,
    z: Complex64,
    h: f64,
) -> Result<f64> {
    let (a, l) = affine_ops(prob, phi.alloc())?;
    let phic = phi.embed();
    let fx = (f_eval_with(&a, &l, &phic, z + Complex64::new(h, 0.0))?
        - f_eval_with(&a, &l, &phic, z - Complex64::new(h, 0.0))?)
        / (2.0 * h);
    let fy = (f_eval_with(&a, &l, &phic, z + Complex64::new(0.0, h))?
        - f_eval_with(&a, &l, &phic, z - Complex64::new(0.0, h))?)
        / (2.0 * h);
    Ok((fx + Complex64::i() * fy).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monotonicity::mono_form;
    use crate::space::{hermite_power_real, norm_p};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn canonical() -> MonoProblem {
        MonoProblem::new(
            MultiplierSpec::affine(0.0, 1.0),
            MultiplierSpec::constant(0.0),
            0.0,
        )
    }

    fn closed_form(z: Complex64) -> Complex64 {
        ((z * 2.0 * 3f64.ln()).exp() - 1.0) / 2.0
    }

    fn random_vec(rng: &mut ChaCha8Rng, k: usize, alloc: usize) -> RealCoeffVec {
        let mut c = vec![0.0; alloc];
        for v in c.iter_mut().take(k) {
            *v = rng.gen_range(-1.0..1.0);
        }
        RealCoeffVec::from_coeffs(c)
    }

    #[test]
    fn closed_form_reproduced() {
        // sigma = 1, b = 0, phi = h_0: F(z) = (3^{2z} - 1)/2
        let prob = canonical();
        let phi = RealCoeffVec::basis(0, 8);
        for &z in &[
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(0.3, 0.7),
            Complex64::new(0.9, -11.0),
        ] {
            let f = f_eval(&prob, &phi, z).unwrap();
            let want = closed_form(z);
            assert!(
                (f - want).norm() <= 1e-12 * (1.0 + want.norm()),
                "z = {z}: {f} vs {want}"
            );
        }
        assert_abs_diff_eq!(
            f_eval(&prob, &phi, Complex64::ZERO).unwrap().norm(),
            0.0,
            epsilon = 1e-13
        );
        assert_relative_eq!(
            f_eval(&prob, &phi, Complex64::new(1.0, 0.0)).unwrap().re,
            4.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn f_at_real_points_is_real_and_matches_mono_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let prob = MonoProblem::new(
                MultiplierSpec::affine(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
                MultiplierSpec::affine(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
                0.0,
            );
            let phi = random_vec(&mut rng, 12, 20);
            for &p in &[0.0, 0.5, 1.0, 2.0] {
                // F(p) with phi replaced by H^p phi reproduces M_p(phi)
                let lifted = hermite_power_real(p, &phi);
                let f = f_eval(&prob, &lifted, Complex64::new(p, 0.0)).unwrap();
                let prob_p = MonoProblem::new(prob.sigma.clone(), prob.b.clone(), p);
                let m = mono_form(&prob_p, &phi).unwrap();
                assert_abs_diff_eq!(f.im, 0.0, epsilon = 1e-10 * (1.0 + m.abs()));
                assert_abs_diff_eq!(f.re, m, epsilon = 1e-10 * (1.0 + m.abs()));
            }
        }
    }

    #[test]
    fn boundary_sup_closed_form() {
        let prob = canonical();
        let phi = RealCoeffVec::basis(0, 8);
        let (m0, m1) = boundary_sup(&prob, &phi, 20.0, 401).unwrap();
        // sup |F(iy)| = 1 and sup |F(1+iy)| = 5, up to grid resolution,
        // then inflated by 1.05
        assert_relative_eq!(m0, 1.05, max_relative = 2e-3);
        assert_relative_eq!(m1, 5.25, max_relative = 2e-3);
    }

    #[test]
    fn boundary_sup_zero_phi() {
        let prob = canonical();
        let phi = RealCoeffVec::zero(8);
        let (m0, m1) = boundary_sup(&prob, &phi, 20.0, 101).unwrap();
        assert_eq!((m0, m1), (0.0, 0.0));
    }

    #[test]
    fn boundary_sup_stable_in_y_range() {
        // F(iy) is almost-periodic for the closed-form case: widening the
        // window does not grow the supremum
        let prob = canonical();
        let phi = RealCoeffVec::basis(0, 8);
        let (m0_a, _) = boundary_sup(&prob, &phi, 20.0, 401).unwrap();
        let (m0_b, _) = boundary_sup(&prob, &phi, 40.0, 801).unwrap();
        assert!(m0_b <= m0_a * 1.001);
    }

    #[test]
    fn three_lines_closed_form_passes() {
        let prob = canonical();
        let phi = RealCoeffVec::basis(0, 8);
        let grid = StripGrid::default_grid();
        let report = three_lines_check(&prob, &phi, &grid).unwrap();
        assert!(report.pass, "worst margin {}", report.worst_margin);
        // midline point: |F(1/2)| = 1 against sqrt(m0 m1)
        let bound = report.m0.sqrt() * report.m1.sqrt();
        assert!(1.0 <= bound);
    }

    #[test]
    fn three_lines_zero_phi_vacuous() {
        let prob = canonical();
        let phi = RealCoeffVec::zero(8);
        let report = three_lines_check(&prob, &phi, &StripGrid::new(10.0, 5, 11)).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn three_lines_random_phi_affine_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let prob = MonoProblem::new(
            MultiplierSpec::affine(1.0, 0.0),
            MultiplierSpec::constant(0.0),
            0.0,
        );
        let grid = StripGrid::new(20.0, 11, 201);
        for _ in 0..3 {
            let phi = random_vec(&mut rng, 16, 24);
            let report = three_lines_check(&prob, &phi, &grid).unwrap();
            assert!(report.pass, "worst margin {}", report.worst_margin);
        }
    }

    #[test]
    fn cauchy_riemann_residual_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let prob = MonoProblem::new(
            MultiplierSpec::affine(0.7, -0.2),
            MultiplierSpec::affine(0.1, 0.4),
            0.0,
        );
        let phi = random_vec(&mut rng, 12, 20);
        let grid = StripGrid::new(10.0, 5, 9);
        let mut max_f = 0.0f64;
        for &x in grid.xs() {
            for &y in grid.ys() {
                max_f = max_f.max(f_eval(&prob, &phi, Complex64::new(x, y)).unwrap().norm());
            }
        }
        for &x in &[0.25, 0.5, 0.75] {
            for &y in &[-5.0, 0.0, 5.0] {
                let r = cauchy_riemann_residual(&prob, &phi, Complex64::new(x, y), 1e-4).unwrap();
                assert!(r <= 1e-6 * max_f, "residual {r} vs max |F| {max_f}");
            }
        }
    }

    #[test]
    fn boundary_reduction_to_commutator_pairing() {
        // for sigma = 1, b = 0:
        // F(iy) = <(H^{2iy} A* H^{-2iy} - A*) H^{iy} phi, A* H^{iy} phi>_0
        let prob = canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let phi = random_vec(&mut rng, 12, 20);
        let a = a_star(&prob.sigma, 20).unwrap();
        for &y in &[-3.0, 0.4, 7.0] {
            let lhs = f_eval(&prob, &phi, Complex64::new(0.0, y)).unwrap();
            let iy = Complex64::new(0.0, y);
            let psi = hermite_power(iy, &phi.embed());
            let a_psi = a.apply_complex(&psi).unwrap();
            let conj2 = hermite_power(
                2.0 * iy,
                &a.apply_complex(&hermite_power(-2.0 * iy, &psi)).unwrap(),
            );
            let rhs = inner_p_c(&conj2.clone(), &a_psi, 0.0) - inner_p_c(&a_psi, &a_psi, 0.0);
            assert!(
                (lhs - rhs).norm() <= 1e-11 * (1.0 + rhs.norm()),
                "y = {y}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn imaginary_power_is_an_isometry_at_level_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let phi = random_vec(&mut rng, 16, 20);
        let lifted = hermite_power(Complex64::new(0.0, 4.2), &phi.embed());
        let a = inner_p_c(&lifted, &lifted, 0.0).re.sqrt();
        assert_relative_eq!(a, norm_p(&phi, 0.0), max_relative = 1e-12);
    }

    #[test]
    fn non_affine_rejected() {
        let prob = MonoProblem::new(
            MultiplierSpec::sampled(|x| x.tanh(), "tanh", Some(64), Some(1.0)),
            MultiplierSpec::constant(0.0),
            0.0,
        );
        let phi = RealCoeffVec::basis(0, 8);
        assert!(matches!(
            f_eval(&prob, &phi, Complex64::ZERO),
            Err(Error::AffineRequired(_))
        ));
    }
}
