//! Spectral Hermite-Sobolev calculus and a numerical certifier for the
//! monotonicity inequality `2 <phi, L* phi>_p + ||A* phi||_p^2 <= C ||phi||_p^2`
//! of the adjoint diffusion pair `A* = -d(sigma .)`,
//! `L* = (1/2) d^2(sigma^2 .) - d(b .)`.
//!
//! Functions are finite Hermite expansions; operators are banded
//! coefficient-space matrices that are exact at truncation as long as no
//! application spills past its allocation. On top of that calculus sit
//!
//! * [`monotonicity`]: the quadratic form, its integration-by-parts oracle
//!   at `p = 0`, and best-constant estimation by generalized Rayleigh
//!   quotients over growing truncations;
//! * [`interpolation`]: the analytic strip function whose boundary bounds
//!   transport integer-index constants to fractional indices;
//! * [`sequences`]: the scalar coefficient families of the shift/scaling
//!   operators, with decay certification;
//! * [`operators`]: derivative, position, multipliers, shifts, the adjoint
//!   decomposition `d* = -d + T`, and the conjugation commutators
//!   `H^w B H^{-w} - B`;
//! * [`hermite`]: pointwise evaluation and Gauss-Hermite quadrature, the
//!   independent route used by the oracles;
//! * [`space`]: coefficient vectors and the weighted inner products.

pub mod error;
pub mod hermite;
pub mod interpolation;
pub mod monotonicity;
pub mod operators;
pub mod sequences;
pub mod space;

pub use error::{Error, Result};
pub use hermite::{
    gauss_hermite, hermite_eval, project, synthesize, HermiteEvalTable, QuadratureRule,
};
pub use interpolation::{
    boundary_sup, cauchy_riemann_residual, f_eval, f_profile, three_lines_check,
    three_lines_from_profile, FProfile, StripGrid, ThreeLinesReport,
};
pub use monotonicity::{
    assemble_form_matrix, best_constant, hermite_power_identity_check, mono_form, mono_p0_oracle,
    plateau_sweep, FormMatrix, MonoProblem, MonotonicityReport, OperatorSet,
};
pub use operators::{
    a_star, adjoint_defect, commutator_family, commutator_hw_partial, commutator_hw_partial_closed,
    commutator_margin, derivative_commutator_form_norm, derivative_op, diag_scale_op,
    finite_section_norm, hermite_power_op, l_star, multiplier_op, position_op, shift_op, BandedOp,
    CommutatorKind, ComplexOp, Growth, MultiplierSpec,
};
pub use sequences::{certify_bound, seq_value, seq_value_real, BoundCertificate, Family};
pub use space::{
    hermite_power, hermite_power_real, inner_p, inner_p_c, norm_p, norm_p_c, parse_coeff_text,
    ComplexCoeffVec, ParsedCoeffVec, RealCoeffVec, SobolevIndex,
};
