use serde::{Deserialize, Serialize};

use super::{DensityMatrix, FockError, FockOperators};
use crate::linear_dynamics::{FirstMoments, GaussianState};

/// Eigenvalues above this count as positive for certification.
pub const EIGENVALUE_TOL: f64 = -1e-8;
pub const HUP_SLACK: f64 = 1e-9;

/// Symmetric-ordered moments ⟨X⟩, ⟨P⟩, ⟨X²⟩, ⟨{X,P}⟩/2, ⟨P²⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMoments {
    pub x: f64,
    pub p: f64,
    pub x2: f64,
    pub xp: f64,
    pub p2: f64,
}

impl SymmetricMoments {
    pub fn means(&self) -> FirstMoments {
        FirstMoments { x: self.x, p: self.p }
    }

    pub fn var_x(&self) -> f64 {
        self.x2 - self.x * self.x
    }

    pub fn var_p(&self) -> f64 {
        self.p2 - self.p * self.p
    }

    pub fn cov_xp(&self) -> f64 {
        self.xp - self.x * self.p
    }

    /// Centered second moments as a [`GaussianState`].
    pub fn gaussian(&self) -> GaussianState {
        GaussianState::from_symmetric_moments(self.var_x(), self.cov_xp(), self.var_p())
    }
}

pub fn moments_from_density(rho: &DensityMatrix, ops: &FockOperators) -> Result<SymmetricMoments, FockError> {
    if rho.dim() != ops.dim {
        return Err(FockError::Dimension(rho.dim()));
    }
    Ok(SymmetricMoments {
        x: rho.expect(&ops.x).re,
        p: rho.expect(&ops.p).re,
        x2: rho.expect(&ops.x2).re,
        xp: 0.5 * rho.expect(&ops.xp_anti).re,
        p2: rho.expect(&ops.p2).re,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HupCertificate {
    pub sigma_x: f64,
    pub sigma_p: f64,
    pub product: f64,
    pub pass: bool,
}

/// Refuses states with an eigenvalue below [`EIGENVALUE_TOL`].
pub fn hup_certificate(rho: &DensityMatrix, ops: &FockOperators) -> Result<HupCertificate, FockError> {
    let min_eig = rho.min_eigenvalue();
    if min_eig < EIGENVALUE_TOL {
        return Err(FockError::Indefinite(min_eig));
    }
    let m = moments_from_density(rho, ops)?;
    let sigma_x = m.var_x().max(0.0).sqrt();
    let sigma_p = m.var_p().max(0.0).sqrt();
    let product = sigma_x * sigma_p;
    Ok(HupCertificate { sigma_x, sigma_p, product, pass: product >= 0.5 - HUP_SLACK })
}
