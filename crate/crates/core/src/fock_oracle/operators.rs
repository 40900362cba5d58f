use nalgebra::DMatrix;
use num_complex::Complex64;

use super::ladder::NormalPoly;
use super::{CMat, FockError};

/// Ladder-basis matrices in a truncated Fock space.
///
/// `x`, `p` are the plain truncations. The quadratic operators `x2`, `p2`,
/// `xp_anti` = {X,P} and `number` are exact truncations of the infinite
/// operators, not products of truncated factors.
#[derive(Debug, Clone)]
pub struct FockOperators {
    pub dim: usize,
    pub a: CMat,
    pub adag: CMat,
    pub x: CMat,
    pub p: CMat,
    pub number: CMat,
    pub x2: CMat,
    pub p2: CMat,
    pub xp_anti: CMat,
    pub identity: CMat,
}

pub const MIN_DIM: usize = 2;

pub fn build_operators(dim: usize) -> Result<FockOperators, FockError> {
    if dim < MIN_DIM {
        return Err(FockError::Dimension(dim));
    }
    let x = NormalPoly::x();
    let p = NormalPoly::p();
    Ok(FockOperators {
        dim,
        a: NormalPoly::a().to_matrix(dim),
        adag: NormalPoly::adag().to_matrix(dim),
        x: x.to_matrix(dim),
        p: p.to_matrix(dim),
        number: (&NormalPoly::adag() * &NormalPoly::a()).to_matrix(dim),
        x2: (&x * &x).to_matrix(dim),
        p2: (&p * &p).to_matrix(dim),
        xp_anti: x.anticommutator(&p).to_matrix(dim),
        identity: DMatrix::identity(dim, dim),
    })
}

impl FockOperators {
    /// H_S = (X² + P²)/2 = a†a + 1/2.
    pub fn oscillator_hamiltonian(&self) -> CMat {
        &self.number + &self.identity * Complex64::new(0.5, 0.0)
    }

    /// [X, P] from the truncated factors.
    pub fn canonical_commutator(&self) -> CMat {
        &self.x * &self.p - &self.p * &self.x
    }
}
