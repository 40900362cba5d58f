use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::ladder::NormalPoly;
use super::{CMat, FockError};
use crate::linear_dynamics::{FirstMoments, GaussianState};

/// Extra Fock levels used when a state is built in a larger space and then
/// truncated.
pub const CONSTRUCTION_PADDING: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub data: CMat,
}

impl DensityMatrix {
    pub fn new(data: CMat) -> Result<Self, FockError> {
        if !data.is_square() || data.nrows() < 2 {
            return Err(FockError::Dimension(data.nrows()));
        }
        Ok(DensityMatrix { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// |n⟩⟨n|.
    pub fn fock(dim: usize, n: usize) -> Result<Self, FockError> {
        if n >= dim {
            return Err(FockError::Dimension(dim));
        }
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        m[(n, n)] = Complex64::new(1.0, 0.0);
        Self::new(m)
    }

    pub fn ground(dim: usize) -> Result<Self, FockError> {
        Self::fock(dim, 0)
    }

    /// Gibbs state of a†a at temperature τ, truncated and renormalized.
    pub fn thermal(dim: usize, tau: f64) -> Result<Self, FockError> {
        if tau == 0.0 {
            return Self::ground(dim);
        }
        let w: Vec<f64> = (0..dim).map(|n| (-(n as f64) / tau).exp()).collect();
        let z: f64 = w.iter().sum();
        Self::new(DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex64::new(w[i] / z, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// Gaussian state with the given second moments (and optional means),
    /// built in a padded space and truncated to `dim`.
    ///
    /// The state is exp(−βK)/Z for the quadratic form K = ½ξᵀGξ, G = W⁻¹,
    /// where V = νW is the covariance and ν its symplectic eigenvalue; this
    /// has covariance ½coth(β/2)·W, so β is fixed by ½coth(β/2) = ν.
    pub fn gaussian(dim: usize, s: &GaussianState, mean: FirstMoments) -> Result<Self, FockError> {
        if !s.is_physical(1e-12) {
            return Err(FockError::Unphysical);
        }
        let big = dim + CONSTRUCTION_PADDING;
        let (x2, xp, p2) = s.symmetric_moments();
        let det = x2 * p2 - xp * xp;
        let nu = det.sqrt().max(0.5);
        let (w11, w12, w22) = (x2 / nu, xp / nu, p2 / nu);
        let wdet = w11 * w22 - w12 * w12;
        let (g11, g12, g22) = (w22 / wdet, -w12 / wdet, w11 / wdet);
        let x = NormalPoly::x();
        let p = NormalPoly::p();
        let k = (&x * &x).scale(Complex64::new(0.5 * g11, 0.0))
            + x.anticommutator(&p).scale(Complex64::new(0.5 * g12, 0.0))
            + (&p * &p).scale(Complex64::new(0.5 * g22, 0.0));
        let eig = SymmetricEigen::new(k.to_matrix(big));
        let e0 = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        // pure state: only the lowest level of K
        let beta = if nu - 0.5 <= 1e-12 { f64::INFINITY } else { ((2.0 * nu + 1.0) / (2.0 * nu - 1.0)).ln() };
        let weights: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&e| if beta.is_infinite() { if e - e0 < 0.5 { 1.0 } else { 0.0 } } else { (-beta * (e - e0)).exp() })
            .collect();
        let mut rho = DMatrix::from_element(big, big, Complex64::new(0.0, 0.0));
        for (k, &w) in weights.iter().enumerate() {
            if w < 1e-300 {
                continue;
            }
            let v = eig.eigenvectors.column(k);
            rho += (v * v.adjoint()) * Complex64::new(w, 0.0);
        }
        if mean.x != 0.0 || mean.p != 0.0 {
            let d = displacement(big + CONSTRUCTION_PADDING, mean)?;
            let d = d.view((0, 0), (big, big)).into_owned();
            rho = &d * rho * d.adjoint();
        }
        let mut out = rho.view((0, 0), (dim, dim)).into_owned();
        let tr = out.trace();
        out /= tr;
        let mut dm = DensityMatrix { data: out };
        dm.rehermitize();
        Ok(dm)
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.data - self.data.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    pub fn rehermitize(&mut self) {
        let adj = self.data.adjoint();
        self.data = (&self.data + adj) * Complex64::new(0.5, 0.0);
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.data.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.data.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Population of the top `k` Fock levels.
    pub fn top_population(&self, k: usize) -> f64 {
        let n = self.dim();
        (n.saturating_sub(k)..n).map(|i| self.data[(i, i)].re).sum()
    }

    /// Tr(O ρ).
    pub fn expect(&self, o: &CMat) -> Complex64 {
        // Tr(Oρ) = Σ_ij O_ij ρ_ji
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += o[(i, j)] * self.data[(j, i)];
            }
        }
        acc
    }

    /// Structural checks: square, Hermitian to 1e-12, unit trace to 1e-10.
    pub fn validate(&self) -> Result<(), FockError> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(FockError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > 1e-10 {
            return Err(FockError::Trace(tr.re));
        }
        Ok(())
    }
}

/// exp(α a† − α* a) with α = (x + ip)/√2, exact up to truncation of `dim`.
fn displacement(dim: usize, mean: FirstMoments) -> Result<CMat, FockError> {
    let alpha = Complex64::new(mean.x, mean.p) * std::f64::consts::FRAC_1_SQRT_2;
    let gen = NormalPoly::linear(-alpha.conj(), alpha, Complex64::new(0.0, 0.0)).to_matrix(dim);
    Ok(gen.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_oracle::operators::build_operators;

    #[test]
    fn thermal_state_variance() {
        let tau = 0.8;
        let ops = build_operators(60).unwrap();
        let rho = DensityMatrix::thermal(60, tau).unwrap();
        let want = 0.5 / (0.5 / tau as f64).tanh();
        assert!((rho.expect(&ops.x2).re - want).abs() < 1e-12);
    }

    #[test]
    fn gaussian_construction_reproduces_moments() {
        // the tilted state has a slow tail, so the space is generous
        let ops = build_operators(80).unwrap();
        for s in [
            GaussianState { dx2: 1.0, dp2: 1.0, rho: 0.0 },
            GaussianState { dx2: 0.5, dp2: 2.0, rho: 0.0 },
            GaussianState { dx2: 2.4, dp2: 1.3, rho: -0.4 },
            GaussianState { dx2: 3.0, dp2: 3.0, rho: 0.5 },
        ] {
            let rho = DensityMatrix::gaussian(80, &s, FirstMoments::default()).unwrap();
            rho.validate().unwrap();
            let (x2, xp, p2) = s.symmetric_moments();
            assert!((rho.expect(&ops.x2).re - x2).abs() < 1e-9, "{s:?}");
            assert!((rho.expect(&ops.p2).re - p2).abs() < 1e-9, "{s:?}");
            assert!((0.5 * rho.expect(&ops.xp_anti).re - xp).abs() < 1e-9, "{s:?}");
            assert!(rho.min_eigenvalue() > -1e-12);
        }
    }

    #[test]
    fn displaced_ground_state() {
        let ops = build_operators(40).unwrap();
        let rho = DensityMatrix::gaussian(40, &GaussianState::GROUND, FirstMoments { x: 1.5, p: -0.5 }).unwrap();
        assert!((rho.expect(&ops.x).re - 1.5).abs() < 1e-9);
        assert!((rho.expect(&ops.p).re + 0.5).abs() < 1e-9);
        let var = rho.expect(&ops.x2).re - 1.5f64.powi(2);
        assert!((var - 0.5).abs() < 1e-9);
    }
}
