//! Quantum Brownian motion in Lindblad form.
//!
//! A harmonic oscillator (ħ = m = Ω = k_B = 1) coupled linearly or
//! quadratically to an Ohmic bath with a Lorentz–Drude cutoff. The crate
//! computes the master-equation coefficients, integrates the moment
//! equations, evaluates phase-space diagnostics of the stationary Wigner
//! function, and checks all of it against a truncated Fock-space solver.

pub mod coefficients;
pub mod fock_oracle;
pub mod integrate;
pub mod linear_dynamics;
pub mod phase_space;
pub mod quadratic_dynamics;
pub mod sweep;

pub use coefficients::{
    BmmeCoefficients, LinearLmeCoefficients, ModelParams, QuadraticBaseCoefficients, QuadraticLmeCoefficients,
};
pub use linear_dynamics::{FirstMoments, GaussianState, MomentTrajectory};
pub use phase_space::PhaseSpaceDiagnostics;
pub use quadratic_dynamics::{ConvergenceReport, ConvergenceStatus, QuadraticClosureState};
