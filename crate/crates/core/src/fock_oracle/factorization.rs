//! Quadratic Lindblad operators in ladder form, their factorization into
//! two linear operators, and the Gaussian approximation of the resulting
//! dissipator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ladder::{LadderGaussian, NormalPoly};
use super::{CMat, FockError};
use crate::linear_dynamics::GaussianState;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Roots with |B| below this are skipped.
const ROOT_EPS: f64 = 1e-12;
/// Linear systems with |det| below this (relative) count as singular.
const SINGULAR_EPS: f64 = 1e-10;

/// L = α a² + β a†² + γ a†a + δ a + ε a† + η.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraticLindbladOp {
    pub alpha_t: Complex64,
    pub beta_t: Complex64,
    pub gamma_t: Complex64,
    pub delta_t: Complex64,
    pub eps_t: Complex64,
    pub eta_t: Complex64,
}

impl QuadraticLindbladOp {
    /// Ladder form of μX² + ν{X,P} + εP².
    pub fn from_quadratic_operator(mu: Complex64, nu: Complex64, eps: Complex64) -> Self {
        QuadraticLindbladOp {
            alpha_t: 0.5 * mu - I * nu - 0.5 * eps,
            beta_t: 0.5 * mu + I * nu - 0.5 * eps,
            gamma_t: mu + eps,
            eta_t: 0.5 * (mu + eps),
            ..Default::default()
        }
    }

    pub fn from_poly(p: &NormalPoly) -> Result<Self, FockError> {
        let known = [(0, 2), (2, 0), (1, 1), (0, 1), (1, 0), (0, 0)];
        if p.terms().any(|(k, c)| !known.contains(&k) && c.norm() > 0.0) {
            return Err(FockError::InvalidInput("operator is not quadratic"));
        }
        Ok(QuadraticLindbladOp {
            alpha_t: p.coefficient(0, 2),
            beta_t: p.coefficient(2, 0),
            gamma_t: p.coefficient(1, 1),
            delta_t: p.coefficient(0, 1),
            eps_t: p.coefficient(1, 0),
            eta_t: p.coefficient(0, 0),
        })
    }

    pub fn to_poly(&self) -> NormalPoly {
        let mut p = NormalPoly::zero();
        p.add_term(0, 2, self.alpha_t);
        p.add_term(2, 0, self.beta_t);
        p.add_term(1, 1, self.gamma_t);
        p.add_term(0, 1, self.delta_t);
        p.add_term(1, 0, self.eps_t);
        p.add_term(0, 0, self.eta_t);
        p
    }

    /// Exact truncation to `dim` levels.
    pub fn to_matrix(&self, dim: usize) -> CMat {
        self.to_poly().to_matrix(dim)
    }

    /// Neither root of the B̃ quadratic is usable when γ̃ = 0 and α̃β̃ = 0.
    pub fn is_generic(&self) -> bool {
        let scale = self.alpha_t.norm().max(self.beta_t.norm()).max(self.gamma_t.norm()).max(1e-300);
        !(self.gamma_t.norm() <= ROOT_EPS * scale && (self.alpha_t * self.beta_t).norm() <= ROOT_EPS * scale * scale)
    }

    fn max_abs(&self) -> f64 {
        [self.alpha_t, self.beta_t, self.gamma_t, self.delta_t, self.eps_t, self.eta_t].iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }
}

/// Returns L' = L + Δη and the Hamiltonian correction ΔH (as a `dim`×`dim`
/// matrix) for which the generator (H + ΔH, L') equals (H, L).
pub fn shift_eta(l: &QuadraticLindbladOp, delta_eta: Complex64, dim: usize) -> (QuadraticLindbladOp, CMat) {
    let shifted = QuadraticLindbladOp { eta_t: l.eta_t + delta_eta, ..*l };
    let poly = l.to_poly();
    // D_{L+c}(ρ) = D_L(ρ) − ½[cL† − c*L, ρ], compensated by ΔH = (i/2)(cL† − c*L)
    let k = poly.adjoint().scale(delta_eta) - poly.scale(delta_eta.conj());
    (shifted, k.scale(0.5 * I).to_matrix(dim))
}

/// u·a + v·a† + w.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLadderOp {
    pub a: Complex64,
    pub adag: Complex64,
    pub constant: Complex64,
}

impl LinearLadderOp {
    pub fn new(a: Complex64, adag: Complex64, constant: Complex64) -> Self {
        LinearLadderOp { a, adag, constant }
    }

    pub fn to_poly(&self) -> NormalPoly {
        NormalPoly::linear(self.a, self.adag, self.constant)
    }
}

/// L + `eta_adjustment` = d1·d2 with d1 = Ãa + B̃a† + C̃ and d2 = a + D̃a† + Ẽ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub d1: LinearLadderOp,
    pub d2: LinearLadderOp,
    pub eta_adjustment: Complex64,
}

impl Factorization {
    pub fn product(&self) -> NormalPoly {
        &self.d1.to_poly() * &self.d2.to_poly()
    }

    /// ‖d1·d2 − (L + adjustment)‖_F on `dim` levels, with the product formed
    /// from (dim+1)-level factors so that it is exact after truncation.
    pub fn reconstruction_error(&self, l: &QuadraticLindbladOp, dim: usize) -> f64 {
        let d1 = self.d1.to_poly().to_matrix(dim + 1);
        let d2 = self.d2.to_poly().to_matrix(dim + 1);
        let prod = (d1 * d2).view((0, 0), (dim, dim)).into_owned();
        let target = l.to_matrix(dim) + CMat::identity(dim, dim) * self.eta_adjustment;
        (prod - target).norm()
    }
}

/// Expanding d1·d2 gives Ã = α̃, B̃D̃ = β̃, ÃD̃ + B̃ = γ̃, ÃẼ + C̃ = δ̃,
/// B̃Ẽ + C̃D̃ = ε̃ and the constant ÃD̃ + C̃Ẽ, which is matched to η̃ by a
/// shift. B̃ solves B̃² − γ̃B̃ + α̃β̃ = 0; both roots are tried.
pub fn factorize_quadratic(l: &QuadraticLindbladOp) -> Result<Factorization, FockError> {
    if !l.is_generic() {
        return Err(FockError::NonGeneric);
    }
    let (al, be, ga) = (l.alpha_t, l.beta_t, l.gamma_t);
    let disc = (ga * ga - 4.0 * al * be).sqrt();
    let mut roots = [0.5 * (ga + disc), 0.5 * (ga - disc)];
    if roots[1].norm() > roots[0].norm() {
        roots.swap(0, 1);
    }
    let scale = l.max_abs().max(1e-300);
    for b in roots {
        if b.norm() <= ROOT_EPS * scale {
            continue;
        }
        let d = be / b;
        // Ã Ẽ + C̃ = δ̃ and B̃ Ẽ + D̃ C̃ = ε̃
        let det = al * d - b;
        if det.norm() <= SINGULAR_EPS * scale {
            continue;
        }
        let e = (l.delta_t * d - l.eps_t) / det;
        let c = l.delta_t - al * e;
        let constant = al * d + c * e;
        return Ok(Factorization {
            d1: LinearLadderOp::new(al, b, c),
            d2: LinearLadderOp::new(Complex64::new(1.0, 0.0), d, e),
            eta_adjustment: constant - l.eta_t,
        });
    }
    Err(FockError::NonGeneric)
}

/// Γ̃ with Γ̃_ij = ⟨d_j'† d_i'⟩, 1' = 2, 2' = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipatorMatrix {
    pub gamma: [[Complex64; 2]; 2],
    pub min_eigenvalue: f64,
    pub psd: bool,
}

pub const PSD_TOL: f64 = -1e-12;

/// Γ̃ under the zero-mean Gaussian state `s`, with a PSD certificate.
pub fn gaussian_dissipator_matrix(d1: &LinearLadderOp, d2: &LinearLadderOp, s: &GaussianState) -> Result<DissipatorMatrix, FockError> {
    if !s.is_physical(1e-12) {
        return Err(FockError::Unphysical);
    }
    let g = LadderGaussian::from_state(s);
    let (p1, p2) = (d1.to_poly(), d2.to_poly());
    let mom = |x: &NormalPoly, y: &NormalPoly| (&x.adjoint() * y).expectation(&g);
    let gamma = [[mom(&p2, &p2), mom(&p1, &p2)], [mom(&p2, &p1), mom(&p1, &p1)]];
    let (a, d) = (gamma[0][0].re, gamma[1][1].re);
    let off = gamma[0][1];
    let min_eigenvalue = 0.5 * (a + d - ((a - d).powi(2) + 4.0 * off.norm_sqr()).sqrt());
    Ok(DissipatorMatrix { gamma, min_eigenvalue, psd: min_eigenvalue >= PSD_TOL })
}

/// d⟨O⟩/dt from the Gaussian-approximated generator: the two anomalous
/// Hamiltonian-like terms plus the Γ̃ dissipator.
pub fn generator_level_rate(d1: &LinearLadderOp, d2: &LinearLadderOp, o: &NormalPoly, g: &LadderGaussian) -> Complex64 {
    let (p1, p2) = (d1.to_poly(), d2.to_poly());
    let l = &p1 * &p2;
    let ld = l.adjoint();
    let ev = |x: &NormalPoly| x.expectation(g);
    let mut rate = ev(&l) * ev(&o.commutator(&ld)) * -0.5 + ev(&ld) * ev(&o.commutator(&l)) * 0.5;
    let ds = [&p1, &p2];
    let dag = [p1.adjoint(), p2.adjoint()];
    // Γ̃_ij = ⟨d_j'† d_i'⟩
    let prime = |k: usize| 1 - k;
    for i in 0..2 {
        for j in 0..2 {
            let gij = ev(&(&dag[prime(j)] * ds[prime(i)]));
            let jump = ev(&(&(&dag[j] * o) * ds[i]));
            let anti = ev(&o.anticommutator(&(&dag[j] * ds[i])));
            rate += gij * (jump - 0.5 * anti);
        }
    }
    rate
}

/// d⟨O⟩/dt = h1 − ½(h2 + h3), each h factorized into pairs of averages.
pub fn moment_level_rate(d1: &LinearLadderOp, d2: &LinearLadderOp, o: &NormalPoly, g: &LadderGaussian) -> Complex64 {
    let (p1, p2) = (d1.to_poly(), d2.to_poly());
    let (q1, q2) = (p1.adjoint(), p2.adjoint());
    let ev = |x: &NormalPoly| x.expectation(g);
    let m3 = |a: &NormalPoly, b: &NormalPoly, c: &NormalPoly| ev(&(&(a * b) * c));
    let m2 = |a: &NormalPoly, b: &NormalPoly| ev(&(a * b));
    let eo = ev(o);
    // pairs (left, right) whose product forms the quartic: ⟨q2 q1⟩⟨p1 p2⟩,
    // ⟨q2 p1⟩⟨q1 p2⟩, ⟨q2 p2⟩⟨q1 p1⟩, each split with O placed in either factor
    let h1 = m2(&q2, &q1) * m3(o, &p1, &p2) + m3(&q2, &q1, o) * m2(&p1, &p2) - m2(&q2, &q1) * eo * m2(&p1, &p2)
        + m2(&q2, &p1) * m3(&q1, o, &p2) + m3(&q2, o, &p1) * m2(&q1, &p2) - m2(&q2, &p1) * eo * m2(&q1, &p2)
        + m2(&q2, &p2) * m3(&q1, o, &p1) + m3(&q2, o, &p2) * m2(&q1, &p1) - m2(&q2, &p2) * eo * m2(&q1, &p1);
    let h2 = m2(&q2, &q1) * m3(o, &p1, &p2) + m3(o, &q2, &q1) * m2(&p1, &p2) - m2(&q2, &q1) * eo * m2(&p1, &p2)
        + m2(&q2, &p1) * m3(o, &q1, &p2) + m3(o, &q2, &p1) * m2(&q1, &p2) - m2(&q2, &p1) * eo * m2(&q1, &p2)
        + m2(&q2, &p2) * m3(o, &q1, &p1) + m3(o, &q2, &p2) * m2(&q1, &p1) - m2(&q2, &p2) * eo * m2(&q1, &p1);
    let h3 = m2(&q2, &q1) * m3(&p1, &p2, o) + m3(&q2, &q1, o) * m2(&p1, &p2) - m2(&q2, &q1) * eo * m2(&p1, &p2)
        + m2(&q2, &p1) * m3(&q1, &p2, o) + m3(&q2, &p1, o) * m2(&q1, &p2) - m2(&q2, &p1) * eo * m2(&q1, &p2)
        + m2(&q2, &p2) * m3(&q1, &p1, o) + m3(&q2, &p2, o) * m2(&q1, &p1) - m2(&q2, &p2) * eo * m2(&q1, &p1);
    h1 - 0.5 * (h2 + h3)
}

/// d⟨O⟩/dt under the exact dissipator of L = d1·d2, evaluated on the
/// Gaussian state (all pairings).
pub fn exact_rate(d1: &LinearLadderOp, d2: &LinearLadderOp, o: &NormalPoly, g: &LadderGaussian) -> Complex64 {
    let l = &d1.to_poly() * &d2.to_poly();
    let ld = l.adjoint();
    let ll = &ld * &l;
    let jump = &(&ld * o) * &l;
    (jump - o.anticommutator(&ll).scale(Complex64::new(0.5, 0.0))).expectation(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_oracle::ladder::quadratic_observables;
    use crate::fock_oracle::{Generator, Term};
    use nalgebra::DMatrix;

    const ZERO: Complex64 = Complex64::new(0.0, 0.0);

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one() -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, c(1.0, 0.0))
    }

    fn test_rho(dim: usize, seed: u64) -> CMat {
        // deterministic pseudo-random positive matrix with unit trace
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = DMatrix::from_fn(dim, dim, |_, _| c(next(), next()));
        let rho = &m * m.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn ladder_form_of_quadratic_operator() {
        let (mu, nu, eps) = (c(1.0, 0.0), c(0.0, 0.2), c(0.1, 0.0));
        let l = QuadraticLindbladOp::from_quadratic_operator(mu, nu, eps);
        let x = NormalPoly::x();
        let p = NormalPoly::p();
        let direct = (&x * &x).scale(mu) + x.anticommutator(&p).scale(nu) + (&p * &p).scale(eps);
        assert!((direct - l.to_poly()).max_abs() < 1e-15);
    }

    #[test]
    fn zero_shift_is_identity() {
        let l = QuadraticLindbladOp { alpha_t: c(0.3, 0.1), gamma_t: c(1.0, 0.0), ..Default::default() };
        let (l2, dh) = shift_eta(&l, ZERO, 8);
        assert_eq!(l, l2);
        assert_eq!(dh.norm(), 0.0);
    }

    #[test]
    fn shift_preserves_generator() {
        let dim = 10;
        let l = QuadraticLindbladOp { delta_t: c(1.0, 0.0), ..Default::default() };
        let h = NormalPoly::adag() * NormalPoly::a();
        let h = h.to_matrix(dim);
        let (l2, dh) = shift_eta(&l, c(1.0, 0.0), dim);
        let a = Generator::new(dim, &[Term::Hamiltonian(h.clone()), Term::Dissipator { ops: vec![l.to_matrix(dim)], kappa: one() }]).unwrap();
        let b = Generator::new(dim, &[Term::Hamiltonian(h + dh), Term::Dissipator { ops: vec![l2.to_matrix(dim)], kappa: one() }]).unwrap();
        for seed in 0..20 {
            let rho = test_rho(dim, seed);
            assert!((a.apply(&rho) - b.apply(&rho)).norm() < 1e-12);
        }
    }

    #[test]
    fn imaginary_shift_gives_hermitian_correction() {
        let l = QuadraticLindbladOp::from_quadratic_operator(c(1.0, 0.0), c(0.3, -0.2), c(0.5, 0.0));
        let (_, dh) = shift_eta(&l, c(0.0, 0.7), 12);
        assert!((&dh - dh.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn pure_square_is_rejected() {
        let l = QuadraticLindbladOp { alpha_t: c(1.0, 0.0), ..Default::default() };
        assert!(matches!(factorize_quadratic(&l), Err(FockError::NonGeneric)));
    }

    #[test]
    fn product_of_two_annihilation_shifts_is_non_generic() {
        // (a + c1)(a + c2) has no a† content, so both roots for B vanish
        let (c1, c2) = (c(0.3, 0.1), c(-0.5, 0.2));
        let f1 = LinearLadderOp::new(c(1.0, 0.0), c(0.0, 0.0), c1);
        let f2 = LinearLadderOp::new(c(1.0, 0.0), c(0.0, 0.0), c2);
        let l = QuadraticLindbladOp::from_poly(&(&f1.to_poly() * &f2.to_poly())).unwrap();
        assert!(matches!(factorize_quadratic(&l), Err(FockError::NonGeneric)));
    }

    #[test]
    fn constructed_product_is_recovered() {
        let f1 = LinearLadderOp::new(c(2.0, 0.0), c(0.5, 0.1), c(0.3, -0.2));
        let f2 = LinearLadderOp::new(c(1.0, 0.0), c(0.3, 0.0), c(-0.4, 0.6));
        let l = QuadraticLindbladOp::from_poly(&(&f1.to_poly() * &f2.to_poly())).unwrap();
        let f = factorize_quadratic(&l).unwrap();
        assert!(f.reconstruction_error(&l, 30) < 1e-10);
    }

    #[test]
    fn quadratic_coupling_operator_factorizes() {
        let l = QuadraticLindbladOp::from_quadratic_operator(c(1.0, 0.0), c(0.0, 0.2), c(0.1, 0.0));
        let f = factorize_quadratic(&l).unwrap();
        assert!(f.reconstruction_error(&l, 40) < 1e-10);
    }

    #[test]
    fn vacuum_dissipator_matrix_rank_one() {
        let d = LinearLadderOp::new(c(0.7, 0.2), ZERO, ZERO);
        let m = gaussian_dissipator_matrix(&d, &d, &GaussianState::GROUND).unwrap();
        assert!(m.psd);
        assert!(m.min_eigenvalue.abs() < 1e-14);
    }

    #[test]
    fn thermal_dissipator_matrix() {
        let tau = 0.9;
        let coth = 1.0 / (0.5 / tau as f64).tanh();
        let nbar = 0.5 * (coth - 1.0);
        let s = GaussianState { dx2: coth, dp2: coth, rho: 0.0 };
        let a = LinearLadderOp::new(c(1.0, 0.0), ZERO, ZERO);
        let ad = LinearLadderOp::new(ZERO, c(1.0, 0.0), ZERO);
        let m = gaussian_dissipator_matrix(&a, &ad, &s).unwrap();
        assert!((m.gamma[0][0].re - (nbar + 1.0)).abs() < 1e-12);
        assert!((m.gamma[1][1].re - nbar).abs() < 1e-12);
        assert!(m.gamma[0][1].norm() < 1e-14);
        assert!(gaussian_dissipator_matrix(&a, &ad, &GaussianState { dx2: 0.5, dp2: 0.5, rho: 0.0 }).is_err());
    }

    #[test]
    fn generator_and_moment_levels_agree() {
        let l = QuadraticLindbladOp::from_quadratic_operator(c(1.0, 0.0), c(0.3, 0.2), c(0.4, 0.0));
        let f = factorize_quadratic(&l).unwrap();
        let g = LadderGaussian::from_state(&GaussianState { dx2: 1.7, dp2: 1.2, rho: 0.3 });
        for o in quadratic_observables() {
            let a = generator_level_rate(&f.d1, &f.d2, &o, &g);
            let b = moment_level_rate(&f.d1, &f.d2, &o, &g);
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}
