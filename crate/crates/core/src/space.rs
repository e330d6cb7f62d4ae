//! Coefficient-space representation of Schwartz functions and the
//! Hermite-Sobolev calculus.
//!
//! A function is a finite expansion `phi = sum_n phi_n h_n`. The `p`-inner
//! product weights mode `n` by `(2n+1)^{2p}`; since supports are finite every
//! inner product and norm here is exact (no truncation error), which is what
//! makes the operator identities in the rest of the crate testable at machine
//! precision.
//!
//! Real and complex vectors are distinct types with an explicit embedding, so
//! the consistency of the real and complex pairings is an assertable fact
//! rather than an implicit cast.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Sobolev regularity index `p` of the weighted space. Complex exponents
/// only occur in `hermite_power`, never in a norm.
pub type SobolevIndex = f64;

/// `(2n+1)^w` in the complex field, via the principal branch.
pub(crate) fn eigen_power(n: usize, w: Complex64) -> Complex64 {
    (w * ((2 * n + 1) as f64).ln()).exp()
}

/// `(2n+1)^p` for real exponents.
pub(crate) fn eigen_power_real(n: usize, p: f64) -> f64 {
    ((2 * n + 1) as f64).powf(p)
}

fn support_of<T: Copy, F: Fn(T) -> bool>(coeffs: &[T], is_zero: F) -> usize {
    coeffs
        .iter()
        .rposition(|&c| !is_zero(c))
        .map_or(0, |i| i + 1)
}

macro_rules! coeffvec_common {
    ($ty:ident, $scalar:ty, $zero:expr) => {
        impl $ty {
            /// Wrap a coefficient list; support is the trailing-nonzero
            /// length, allocation the full length.
            pub fn from_coeffs(coeffs: Vec<$scalar>) -> Self {
                let support = support_of(&coeffs, |c| c == $zero);
                $ty { coeffs, support }
            }

            /// The zero vector with the given allocation.
            pub fn zero(alloc: usize) -> Self {
                $ty {
                    coeffs: vec![$zero; alloc],
                    support: 0,
                }
            }

            /// The basis vector `h_n`.
            pub fn basis(n: usize, alloc: usize) -> Self {
                assert!(n < alloc, "basis index must fit the allocation");
                let mut coeffs = vec![$zero; alloc];
                coeffs[n] = 1.0.into();
                $ty {
                    coeffs,
                    support: n + 1,
                }
            }

            pub fn coeffs(&self) -> &[$scalar] {
                &self.coeffs
            }

            /// Highest declared-nonzero index plus one.
            pub fn support(&self) -> usize {
                self.support
            }

            pub fn alloc(&self) -> usize {
                self.coeffs.len()
            }

            /// Value-preserving re-allocation to `alloc >= support`.
            pub fn pad(&self, alloc: usize) -> Result<Self> {
                if alloc < self.support {
                    return Err(Error::AllocTooSmall {
                        alloc,
                        required: self.support,
                    });
                }
                let mut coeffs = self.coeffs.clone();
                coeffs.resize(alloc, $zero);
                Ok($ty {
                    coeffs,
                    support: self.support,
                })
            }

            /// Re-declare the support as `k`; errors if any coefficient at or
            /// beyond `k` is nonzero.
            pub fn truncate_declared(&self, k: usize) -> Result<Self> {
                if let Some(i) = self.coeffs[k.min(self.alloc())..]
                    .iter()
                    .position(|&c| c != $zero)
                {
                    return Err(Error::TruncateBelowSupport {
                        requested: k,
                        nonzero_at: k + i,
                    });
                }
                Ok($ty {
                    coeffs: self.coeffs.clone(),
                    support: self.support.min(k),
                })
            }
        }
    };
}

/// Finite Hermite expansion with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RealCoeffVec {
    coeffs: Vec<f64>,
    support: usize,
}

/// Finite Hermite expansion with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexCoeffVec {
    coeffs: Vec<Complex64>,
    support: usize,
}

coeffvec_common!(RealCoeffVec, f64, 0.0);
coeffvec_common!(ComplexCoeffVec, Complex64, Complex64::ZERO);

impl RealCoeffVec {
    /// The embedding into the complex space; `inner_p` values are preserved
    /// exactly.
    pub fn embed(&self) -> ComplexCoeffVec {
        ComplexCoeffVec {
            coeffs: self
                .coeffs
                .iter()
                .map(|&c| Complex64::new(c, 0.0))
                .collect(),
            support: self.support,
        }
    }
}

impl ComplexCoeffVec {
    pub fn conj(&self) -> ComplexCoeffVec {
        ComplexCoeffVec {
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
            support: self.support,
        }
    }
}

/// Real pairing `<f, g>_p = sum_k (2k+1)^{2p} f_k g_k`.
pub fn inner_p(f: &RealCoeffVec, g: &RealCoeffVec, p: SobolevIndex) -> f64 {
    let m = f.support().min(g.support());
    (0..m)
        .map(|k| eigen_power_real(k, 2.0 * p) * f.coeffs[k] * g.coeffs[k])
        .sum()
}

/// Complex pairing `<f, g>_{p,C} = sum_k (2k+1)^{2p} f_k conj(g_k)`.
pub fn inner_p_c(f: &ComplexCoeffVec, g: &ComplexCoeffVec, p: SobolevIndex) -> Complex64 {
    let m = f.support().min(g.support());
    (0..m)
        .map(|k| f.coeffs[k] * g.coeffs[k].conj() * eigen_power_real(k, 2.0 * p))
        .sum()
}

/// `|| f ||_p = sqrt(<f, f>_p)`.
pub fn norm_p(f: &RealCoeffVec, p: SobolevIndex) -> f64 {
    inner_p(f, f, p).max(0.0).sqrt()
}

/// `|| f ||_{p,C}`.
pub fn norm_p_c(f: &ComplexCoeffVec, p: SobolevIndex) -> f64 {
    inner_p_c(f, f, p).re.max(0.0).sqrt()
}

/// `H^w f`: multiply coefficient `n` by `(2n+1)^w = exp(w ln(2n+1))`.
/// Support is unchanged.
pub fn hermite_power(w: Complex64, f: &ComplexCoeffVec) -> ComplexCoeffVec {
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, &c)| eigen_power(n, w) * c)
        .collect();
    ComplexCoeffVec {
        coeffs,
        support: f.support,
    }
}

/// `H^p f` for real data and real exponent.
pub fn hermite_power_real(p: f64, f: &RealCoeffVec) -> RealCoeffVec {
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(n, &c)| eigen_power_real(n, p) * c)
        .collect();
    RealCoeffVec {
        coeffs,
        support: f.support,
    }
}

// ---------------------------------------------------------------------------
// plain-text serialization
//
// header `# field=real|complex K=<int>` followed by one line per coefficient
// index below K: `n <re>` or `n <re> <im>`.
// ---------------------------------------------------------------------------

fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

impl RealCoeffVec {
    pub fn to_text(&self) -> String {
        let mut out = format!("# field=real K={}\n", self.support);
        for n in 0..self.support {
            out.push_str(&format!("{} {}\n", n, fmt_f64(self.coeffs[n])));
        }
        out
    }
}

impl ComplexCoeffVec {
    pub fn to_text(&self) -> String {
        let mut out = format!("# field=complex K={}\n", self.support);
        for n in 0..self.support {
            out.push_str(&format!(
                "{} {} {}\n",
                n,
                fmt_f64(self.coeffs[n].re),
                fmt_f64(self.coeffs[n].im)
            ));
        }
        out
    }
}

/// Either flavour of coefficient vector, as read back from text.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedCoeffVec {
    Real(RealCoeffVec),
    Complex(ComplexCoeffVec),
}

/// Parse the plain-text coefficient format.
pub fn parse_coeff_text(text: &str) -> Result<ParsedCoeffVec> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::CoeffParse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let header = header.trim();
    let bad_header = |msg: &str| Error::CoeffParse {
        line: 1,
        msg: msg.into(),
    };
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| bad_header("header must start with '#'"))?
        .trim();
    let mut field = None;
    let mut k = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("field=") {
            field = Some(v.to_string());
        } else if let Some(v) = tok.strip_prefix("K=") {
            k = Some(v.parse::<usize>().map_err(|e| bad_header(&e.to_string()))?);
        }
    }
    let field = field.ok_or_else(|| bad_header("missing field="))?;
    let k = k.ok_or_else(|| bad_header("missing K="))?;

    let mut re = vec![0.0; k];
    let mut im = vec![0.0; k];
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::CoeffParse { line: idx + 1, msg };
        let mut parts = line.split_whitespace();
        let n: usize = parts
            .next()
            .ok_or_else(|| err("missing index".into()))?
            .parse()
            .map_err(|e: std::num::ParseIntError| err(e.to_string()))?;
        if n >= k {
            return Err(err(format!("index {} outside declared support {}", n, k)));
        }
        let x: f64 = parts
            .next()
            .ok_or_else(|| err("missing coefficient".into()))?
            .parse()
            .map_err(|e: std::num::ParseFloatError| err(e.to_string()))?;
        re[n] = x;
        if field == "complex" {
            let y: f64 = parts
                .next()
                .ok_or_else(|| err("missing imaginary part".into()))?
                .parse()
                .map_err(|e: std::num::ParseFloatError| err(e.to_string()))?;
            im[n] = y;
        }
    }
    match field.as_str() {
        "real" => Ok(ParsedCoeffVec::Real(RealCoeffVec::from_coeffs(re))),
        "complex" => Ok(ParsedCoeffVec::Complex(ComplexCoeffVec::from_coeffs(
            re.into_iter()
                .zip(im)
                .map(|(a, b)| Complex64::new(a, b))
                .collect(),
        ))),
        other => Err(Error::CoeffParse {
            line: 1,
            msg: format!("unknown field '{}'", other),
        }),
    }
}
