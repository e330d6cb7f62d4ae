//! Shared helpers for the acceptance suite: seeded random vectors and the
//! independent Taylor-expansion oracle for the sequence limits.

use hermsob::{Family, RealCoeffVec};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn seeded_unit_vec(rng: &mut ChaCha8Rng, k: usize, alloc: usize) -> RealCoeffVec {
    let mut c = vec![0.0; alloc];
    for v in c.iter_mut().take(k) {
        *v = rng.gen_range(-1.0..1.0);
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in c.iter_mut() {
            *v /= norm;
        }
    } else {
        c[0] = 1.0;
    }
    RealCoeffVec::from_coeffs(c)
}

/// Limit of `n^e |s_n(w)|` from the first- and second-order Taylor
/// expansions of the brackets, independent of the sequence evaluation path.
///
/// Single-difference families: bracket ~ `w d / den` with deviation `d`,
/// prefactor ~ `P(n)`. Second-difference families: the linear terms cancel
/// and bracket ~ `w(w-1)/2 * sum c_j d_j^2 / den^2`.
pub fn expansion_limit(fam: Family, w: Complex64) -> f64 {
    let aw = w.norm();
    let aww = (w * (w - 1.0)).norm();
    let s2 = 2f64.sqrt();
    match fam {
        // P ~ sqrt(n/2), bracket ~ -2w/(2n) -> |w|/sqrt(2n) scaled by sqrt(n)
        Family::AlphaTilde | Family::BetaTilde => aw / s2,
        // P ~ sqrt(n/2), bracket ~ -4w/(2n)
        Family::ATilde => s2 * aw,
        // P ~ sqrt(n/2), bracket ~ -6w/(2n)
        Family::BTilde => 3.0 * aw / s2,
        // P ~ n, bracket ~ 4w/(2n)
        Family::GammaTilde | Family::MTilde | Family::LTilde => 2.0 * aw,
        // P ~ n^2/4, bracket ~ 16 w(w-1)/2 / (2n)^2 = 2 w(w-1)/n^2
        Family::A | Family::B | Family::C => aww,
        // P ~ n^{3/2}/(2 sqrt2), bracket ~ 8 w(w-1) / (2n)^2
        Family::L | Family::M | Family::T | Family::Alpha => aww / s2,
        // P ~ sqrt(n/2), bracket ~ 6 w(w-1) / (2n)^2
        Family::Beta | Family::Gamma => 3.0 * aww / (2.0 * s2),
    }
}
