//! The named scalar sequences behind the shift/scaling operators and the
//! commutator bounds, with their decay-rate certification.
//!
//! Every family has the shape
//!
//! ```text
//! s_n(w) = P(n) * sum_j c_j [ ((2n + a_j)/(2n + d))^w - 1 ],
//! ```
//!
//! a prefactor `P` of polynomial growth times a bracket whose coefficients
//! sum against the constant so that the bracket is `O(1/n)` (single-ratio
//! families) or `O(1/n^2)` (the second-difference families). The bracket is
//! evaluated through `expm1(w ln1p(.))`, which keeps the cancellation noise
//! at the size of the bracket itself; for integer `w` the bracket is a
//! rational number and is computed exactly in `i128`, so sequences that
//! vanish identically (every second-difference family at `w = 1`) come out
//! as exact zeros.
//!
//! Three of the second-difference formulas circulate with sign or offset
//! misprints that contradict their own decay bounds; the variants here are
//! the minimal corrections that restore the leading-order cancellation, and
//! the certification tests pin their expansion limits.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// The sequence families. `*Tilde` names are the single-difference family
/// (coefficients of first-order commutators), the rest the second-difference
/// family (coefficients of second-order commutators).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    AlphaTilde,
    BetaTilde,
    GammaTilde,
    MTilde,
    LTilde,
    ATilde,
    BTilde,
    A,
    B,
    C,
    L,
    M,
    T,
    Alpha,
    Beta,
    Gamma,
}

/// One bracket term `c * [((2n + num_off)/(2n + den_off))^w - 1]` with the
/// coefficient kept as an exact rational.
struct Term {
    c_num: i64,
    c_den: i64,
    num_off: i64,
}

struct FamilySpec {
    name: &'static str,
    terms: &'static [Term],
    den_off: i64,
    decay: f64,
}

const fn t(c_num: i64, c_den: i64, num_off: i64) -> Term {
    Term {
        c_num,
        c_den,
        num_off,
    }
}

impl Family {
    pub const ALL: [Family; 16] = [
        Family::AlphaTilde,
        Family::BetaTilde,
        Family::GammaTilde,
        Family::MTilde,
        Family::LTilde,
        Family::ATilde,
        Family::BTilde,
        Family::A,
        Family::B,
        Family::C,
        Family::L,
        Family::M,
        Family::T,
        Family::Alpha,
        Family::Beta,
        Family::Gamma,
    ];

    fn spec(self) -> &'static FamilySpec {
        static ALPHA_TILDE: FamilySpec = FamilySpec {
            name: "alpha_tilde",
            terms: &[t(1, 1, -1)],
            den_off: 1,
            decay: 0.5,
        };
        static BETA_TILDE: FamilySpec = FamilySpec {
            name: "beta_tilde",
            terms: &[t(-1, 1, 3)],
            den_off: 1,
            decay: 0.5,
        };
        static GAMMA_TILDE: FamilySpec = FamilySpec {
            name: "gamma_tilde",
            terms: &[t(1, 1, 1)],
            den_off: -3,
            decay: 0.0,
        };
        static M_TILDE: FamilySpec = FamilySpec {
            name: "m_tilde",
            terms: &[t(1, 1, 1)],
            den_off: 5,
            decay: 0.0,
        };
        static L_TILDE: FamilySpec = FamilySpec {
            name: "l_tilde",
            terms: &[t(1, 1, 5)],
            den_off: 1,
            decay: 0.0,
        };
        static A_TILDE: FamilySpec = FamilySpec {
            name: "a_tilde",
            terms: &[t(-1, 1, 1)],
            den_off: -3,
            decay: 0.5,
        };
        // same decay class as a_tilde: sqrt(n) |b~_n(w)| -> 3|w|/sqrt(2)
        static B_TILDE: FamilySpec = FamilySpec {
            name: "b_tilde",
            terms: &[t(1, 1, -1)],
            den_off: 5,
            decay: 0.5,
        };
        static A2: FamilySpec = FamilySpec {
            name: "a",
            terms: &[t(1, 1, 1), t(-2, 1, -3)],
            den_off: -7,
            decay: 0.0,
        };
        static B2: FamilySpec = FamilySpec {
            name: "b",
            terms: &[t(1, 1, -3), t(1, 1, 5)],
            den_off: 1,
            decay: 0.0,
        };
        static C2: FamilySpec = FamilySpec {
            name: "c",
            terms: &[t(1, 1, 1), t(-2, 1, 5)],
            den_off: 9,
            decay: 0.0,
        };
        static L2: FamilySpec = FamilySpec {
            name: "l",
            terms: &[t(1, 1, 1), t(-1, 1, -3), t(-1, 1, -1)],
            den_off: -5,
            decay: 0.5,
        };
        static M2: FamilySpec = FamilySpec {
            name: "m",
            terms: &[t(-1, 1, 1), t(1, 1, -3), t(1, 1, 3)],
            den_off: -1,
            decay: 0.5,
        };
        static T2: FamilySpec = FamilySpec {
            name: "t",
            terms: &[t(1, 1, 5), t(-1, 1, 1), t(1, 1, -1)],
            den_off: 3,
            decay: 0.5,
        };
        static ALPHA2: FamilySpec = FamilySpec {
            name: "alpha",
            terms: &[t(1, 1, 1), t(-1, 1, 3), t(-1, 1, 5)],
            den_off: 7,
            decay: 0.5,
        };
        static BETA2: FamilySpec = FamilySpec {
            name: "beta",
            terms: &[t(1, 2, 3), t(1, 1, -3)],
            den_off: -1,
            decay: 1.5,
        };
        static GAMMA2: FamilySpec = FamilySpec {
            name: "gamma",
            terms: &[t(1, 2, -1), t(1, 1, 5)],
            den_off: 3,
            decay: 1.5,
        };
        match self {
            Family::AlphaTilde => &ALPHA_TILDE,
            Family::BetaTilde => &BETA_TILDE,
            Family::GammaTilde => &GAMMA_TILDE,
            Family::MTilde => &M_TILDE,
            Family::LTilde => &L_TILDE,
            Family::ATilde => &A_TILDE,
            Family::BTilde => &B_TILDE,
            Family::A => &A2,
            Family::B => &B2,
            Family::C => &C2,
            Family::L => &L2,
            Family::M => &M2,
            Family::T => &T2,
            Family::Alpha => &ALPHA2,
            Family::Beta => &BETA2,
            Family::Gamma => &GAMMA2,
        }
    }

    /// CSV/display name.
    pub fn name(self) -> &'static str {
        self.spec().name
    }

    /// Exponent `e` such that `n^e |s_n|` stays bounded.
    pub fn claimed_decay(self) -> f64 {
        self.spec().decay
    }

    /// Smallest index at which the family is defined for the given exponent.
    /// Integer exponents allow every `n >= 1` (the ratios are rational);
    /// otherwise all bases must be positive for the principal branch.
    pub fn first_valid_n(self, w: Complex64) -> u64 {
        if is_integer(w) {
            return 1;
        }
        let spec = self.spec();
        let mut min_off = spec.den_off;
        for term in spec.terms {
            min_off = min_off.min(term.num_off);
        }
        // 2n + min_off >= 1
        (((1 - min_off) as f64 / 2.0).ceil() as i64).max(1) as u64
    }

    fn prefactor(self, n: f64) -> f64 {
        match self {
            Family::AlphaTilde | Family::ATilde | Family::Beta => (n / 2.0).sqrt(),
            Family::BetaTilde | Family::BTilde | Family::Gamma => ((n + 1.0) / 2.0).sqrt(),
            Family::GammaTilde => (n * (n - 1.0)).max(0.0).sqrt(),
            Family::MTilde => ((n + 1.0) * (n + 2.0)).sqrt(),
            Family::LTilde => (2.0 * n + 1.0) / 2.0,
            Family::A => (n * (n - 1.0) * (n - 2.0) * (n - 3.0)).max(0.0).sqrt() / 4.0,
            Family::B => n * (n - 1.0) / 4.0,
            Family::C => (n * (n + 1.0) * (n + 2.0) * (n + 3.0)).sqrt() / 4.0,
            Family::L => ((n * (n - 1.0) * (n - 2.0)).max(0.0) / 8.0).sqrt(),
            Family::M => (n + 1.0) / 2.0 * (n / 2.0).sqrt(),
            Family::T => n / 2.0 * ((n + 1.0) / 2.0).sqrt(),
            Family::Alpha => ((n + 1.0) * (n + 2.0) * (n + 3.0) / 8.0).sqrt(),
        }
    }
}

fn is_integer(w: Complex64) -> bool {
    w.im == 0.0 && w.re.fract() == 0.0 && w.re.abs() <= 8.0
}

/// `e^z - 1` without cancellation for small `z`.
fn cexpm1(z: Complex64) -> Complex64 {
    let m = z.norm_sqr();
    if m > 0.25 {
        return z.exp() - 1.0;
    }
    // truncate the series z (1 + z/2 (1 + z/3 (...))) where the tail drops
    // below one ulp of the leading term
    let terms = if m < 1e-12 {
        4
    } else if m < 1e-4 {
        8
    } else {
        24
    };
    let mut acc = Complex64::ZERO;
    for k in (2..=terms).rev() {
        acc = (acc + 1.0) * z / k as f64;
    }
    z * (acc + 1.0)
}

/// Exact rational bracket for integer exponents, or `None` if an `i128`
/// intermediate would overflow.
fn bracket_exact(spec: &FamilySpec, k: i64, n: u64) -> Option<f64> {
    let two_n = 2 * n as i128;
    let den = two_n + spec.den_off as i128;
    let kk = k.unsigned_abs() as u32;
    let coeff_lcm: i128 = if spec.terms.iter().any(|t| t.c_den == 2) {
        2
    } else {
        1
    };
    let pow = |b: i128, e: u32| -> Option<i128> {
        let mut acc: i128 = 1;
        for _ in 0..e {
            acc = acc.checked_mul(b)?;
        }
        Some(acc)
    };
    if k >= 0 {
        // common denominator lcm * den^k
        let den_k = pow(den, kk)?;
        let mut num: i128 = 0;
        for term in spec.terms {
            let c = term.c_num as i128 * (coeff_lcm / term.c_den as i128);
            let r = pow(two_n + term.num_off as i128, kk)?;
            num = num.checked_add(c.checked_mul(r.checked_sub(den_k)?)?)?;
        }
        Some(num as f64 / (coeff_lcm as f64 * den_k as f64))
    } else {
        // ratio^k = (den/num)^{|k|}; common denominator lcm * prod num_j^{|k|}
        let mut prod_all: i128 = 1;
        for term in spec.terms {
            prod_all = prod_all.checked_mul(pow(two_n + term.num_off as i128, kk)?)?;
        }
        let den_k = pow(den, kk)?;
        let mut num: i128 = 0;
        for term in spec.terms {
            let c = term.c_num as i128 * (coeff_lcm / term.c_den as i128);
            let nj = pow(two_n + term.num_off as i128, kk)?;
            let others = prod_all / nj;
            num =
                num.checked_add(c.checked_mul(den_k.checked_mul(others)?.checked_sub(prod_all)?)?)?;
        }
        Some(num as f64 / (coeff_lcm as f64 * prod_all as f64))
    }
}

/// Evaluate `s_n(w)` for the family.
///
/// Errors when a ratio base is non-positive under a non-integer exponent
/// (the principal branch leaves the positive axis there); integer exponents
/// are evaluated as exact rationals.
pub fn seq_value(fam: Family, w: Complex64, n: u64) -> Result<Complex64> {
    let spec = fam.spec();
    let two_n = 2 * n as i64;
    let den = two_n + spec.den_off;
    if is_integer(w) {
        if let Some(b) = bracket_exact(spec, w.re as i64, n) {
            return Ok(Complex64::new(fam.prefactor(n as f64) * b, 0.0));
        }
        // fall through to the transcendental path on overflow
    }
    if den <= 0 {
        return Err(Error::SequenceDomain {
            family: spec.name,
            n,
            base: den,
        });
    }
    if w.im == 0.0 {
        // real exponents stay in real arithmetic
        let mut bracket = 0.0f64;
        for term in spec.terms {
            let num = two_n + term.num_off;
            if num <= 0 {
                return Err(Error::SequenceDomain {
                    family: spec.name,
                    n,
                    base: num,
                });
            }
            let lr = ((num - den) as f64 / den as f64).ln_1p();
            let c = term.c_num as f64 / term.c_den as f64;
            bracket += c * (w.re * lr).exp_m1();
        }
        return Ok(Complex64::new(bracket * fam.prefactor(n as f64), 0.0));
    }
    let mut bracket = Complex64::ZERO;
    for term in spec.terms {
        let num = two_n + term.num_off;
        if num <= 0 {
            return Err(Error::SequenceDomain {
                family: spec.name,
                n,
                base: num,
            });
        }
        // ratio^w - 1 = expm1(w ln1p((num - den)/den))
        let lr = ((num - den) as f64 / den as f64).ln_1p();
        let c = term.c_num as f64 / term.c_den as f64;
        bracket += cexpm1(w * lr) * c;
    }
    Ok(bracket * fam.prefactor(n as f64))
}

/// Real-exponent evaluation (the common case for the adjoint operator `T`).
pub fn seq_value_real(fam: Family, w: f64, n: u64) -> Result<f64> {
    Ok(seq_value(fam, Complex64::new(w, 0.0), n)?.re)
}

/// Result of scanning `n^e |s_n|` up to `n_max`.
#[derive(Debug, Clone)]
pub struct BoundCertificate {
    /// `max over valid n <= n_max of n^e |s_n(w)|`.
    pub max_scaled: f64,
    /// Where the maximum was attained.
    pub argmax: u64,
    /// `n^e |s_n|` at `n = n_max` (the tail value).
    pub asymptote: f64,
    /// First index scanned.
    pub first_n: u64,
}

/// Scan the scaled sequence and certify its boundedness numerically.
pub fn certify_bound(fam: Family, w: Complex64, n_max: u64) -> Result<BoundCertificate> {
    assert!(n_max >= 100, "need n_max >= 100 for a meaningful scan");
    let e = fam.claimed_decay();
    let first = fam.first_valid_n(w);
    let mut max_scaled = f64::NEG_INFINITY;
    let mut argmax = first;
    let mut last = 0.0;
    for n in first..=n_max {
        let scaled = (n as f64).powf(e) * seq_value(fam, w, n)?.norm();
        if scaled > max_scaled {
            max_scaled = scaled;
            argmax = n;
        }
        last = scaled;
    }
    Ok(BoundCertificate {
        max_scaled,
        argmax,
        asymptote: last,
        first_n: first,
    })
}
