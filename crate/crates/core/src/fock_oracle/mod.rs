//! Truncated Fock-space solver used to check the moment equations.
//!
//! Density matrices live in the span of |0⟩..|N−1⟩. Quadratic operators are
//! built as exact truncations from their normal-ordered form, so truncation
//! only touches the top level; runs record the top-level population and are
//! flagged untrusted above [`TRUNCATION_GATE`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::coefficients::CoefficientError;

mod density;
mod evolve;
mod factorization;
mod generator;
pub mod ladder;
mod moments;
mod operators;
mod oracle;

pub use density::{DensityMatrix, CONSTRUCTION_PADDING};
pub use evolve::{evolve_density, evolve_density_with, EvolveOptions, Propagator, TruncationReport, TAYLOR_MAX_DIM, TRUNCATION_GATE};
pub use factorization::{
    exact_rate, factorize_quadratic, gaussian_dissipator_matrix, generator_level_rate, moment_level_rate, shift_eta, DissipatorMatrix,
    Factorization, LinearLadderOp, QuadraticLindbladOp, PSD_TOL,
};
pub use generator::{
    linear_commutator_generator, linear_lme_generator, lindblad_rhs, quadratic_commutator_generator, quadratic_commutator_terms, Generator,
    Term, KOSSAKOWSKI_TOL,
};
pub use moments::{hup_certificate, moments_from_density, HupCertificate, SymmetricMoments, EIGENVALUE_TOL, HUP_SLACK};
pub use operators::{build_operators, FockOperators, MIN_DIM};
pub use oracle::{
    moment_relative_error, run_bmme_contrast, run_linear_oracle, BmmeContrastReport, OracleConfig, OracleReport, PassFlags,
    DEFAULT_LINEAR_DIM, DEFAULT_QUADRATIC_DIM, MOMENT_TOL,
};

pub type CMat = DMatrix<Complex64>;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("unsupported dimension {0}")]
    Dimension(usize),
    #[error("Gaussian state violates the uncertainty bound")]
    Unphysical,
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace {0} differs from 1")]
    Trace(f64),
    #[error("Kossakowski matrix has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("density matrix has negative eigenvalue {0:e}; certificate refused")]
    Indefinite(f64),
    #[error("non-generic quadratic operator: no usable factorization")]
    NonGeneric,
    #[error("non-finite density matrix at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("reference computation failed: {0}")]
    Reference(String),
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
}
