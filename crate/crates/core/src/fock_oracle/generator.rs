//! Master-equation generators on truncated density matrices.
//!
//! Every generator used here is a sum of left multiplications, right
//! multiplications and sandwiches P ρ Q, so it is compiled once into that
//! form and applied with a handful of dense products.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CMat, FockError, FockOperators};
use crate::coefficients::{lindblad_alpha_beta, LinearLmeCoefficients, QuadraticLmeCoefficients};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest Kossakowski eigenvalue accepted as positive semidefinite.
pub const KOSSAKOWSKI_TOL: f64 = -1e-12;

#[derive(Debug, Clone)]
pub enum Term {
    /// −i[H, ρ]
    Hamiltonian(CMat),
    /// Σ κ_ij (L_i ρ L_j† − ½{L_j† L_i, ρ})
    Dissipator { ops: Vec<CMat>, kappa: DMatrix<Complex64> },
    /// −coef [A, [B, ρ]]
    DoubleCommutator { coef: f64, a: CMat, b: CMat },
    /// −i coef [A, {B, ρ}]
    CommutatorAnticommutator { coef: f64, a: CMat, b: CMat },
}

/// ρ ↦ Mρ + ρM† + Σ P_k ρ Q_k.
#[derive(Debug, Clone)]
pub struct Generator {
    dim: usize,
    left: CMat,
    right: CMat,
    sandwiches: Vec<(CMat, CMat)>,
    lindblad_form: bool,
    /// Upper bound on the superoperator norm (Frobenius-based).
    norm_bound: f64,
}

impl Generator {
    pub fn new(dim: usize, terms: &[Term]) -> Result<Self, FockError> {
        let mut left = DMatrix::from_element(dim, dim, ZERO);
        let mut right = DMatrix::from_element(dim, dim, ZERO);
        let mut sandwiches = Vec::new();
        let mut lindblad_form = true;
        for t in terms {
            match t {
                Term::Hamiltonian(h) => {
                    check_dim(h, dim)?;
                    left -= h * I;
                    right += h * I;
                }
                Term::Dissipator { ops, kappa } => {
                    if kappa.nrows() != ops.len() || kappa.ncols() != ops.len() {
                        return Err(FockError::Dimension(kappa.nrows()));
                    }
                    for l in ops {
                        check_dim(l, dim)?;
                    }
                    let min_eig = kappa.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
                    if min_eig < KOSSAKOWSKI_TOL {
                        return Err(FockError::NotPositive(min_eig));
                    }
                    let mut g = DMatrix::from_element(dim, dim, ZERO);
                    for (i, li) in ops.iter().enumerate() {
                        // Σ_j κ_ij L_i ρ L_j† = L_i ρ (Σ_j κ_ij* L_j)†
                        let mut k = DMatrix::from_element(dim, dim, ZERO);
                        for (j, lj) in ops.iter().enumerate() {
                            k += lj * kappa[(i, j)].conj();
                            g += lj.adjoint() * li * kappa[(i, j)];
                        }
                        sandwiches.push((li.clone(), k.adjoint()));
                    }
                    left -= &g * Complex64::new(0.5, 0.0);
                    right -= &g * Complex64::new(0.5, 0.0);
                }
                Term::DoubleCommutator { coef, a, b } => {
                    check_dim(a, dim)?;
                    check_dim(b, dim)?;
                    lindblad_form = false;
                    let c = Complex64::new(*coef, 0.0);
                    left -= (a * b) * c;
                    right -= (b * a) * c;
                    sandwiches.push((a * c, b.clone()));
                    sandwiches.push((b * c, a.clone()));
                }
                Term::CommutatorAnticommutator { coef, a, b } => {
                    check_dim(a, dim)?;
                    check_dim(b, dim)?;
                    lindblad_form = false;
                    let c = I * *coef;
                    left -= (a * b) * c;
                    right += (b * a) * c;
                    sandwiches.push((a * (-c), b.clone()));
                    sandwiches.push((b * c, a.clone()));
                }
            }
        }
        let norm_bound = left.norm() + right.norm() + sandwiches.iter().map(|(p, q)| p.norm() * q.norm()).sum::<f64>();
        Ok(Generator { dim, left, right, sandwiches, lindblad_form, norm_bound })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when built only from Hamiltonian and PSD dissipator terms.
    pub fn is_lindblad_form(&self) -> bool {
        self.lindblad_form
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = &self.left * rho + rho * &self.right;
        for (p, q) in &self.sandwiches {
            out += p * rho * q;
        }
        out
    }
}

fn check_dim(m: &CMat, dim: usize) -> Result<(), FockError> {
    if m.nrows() != dim || m.ncols() != dim {
        Err(FockError::Dimension(m.nrows()))
    } else {
        Ok(())
    }
}

/// −i[H,ρ] + Σ κ_ij (L_i ρ L_j† − ½{L_j†L_i, ρ}). Rejects κ that is not
/// positive semidefinite.
pub fn lindblad_rhs(rho: &CMat, h: &CMat, ops: &[CMat], kappa: &DMatrix<Complex64>) -> Result<CMat, FockError> {
    let gen = Generator::new(
        rho.nrows(),
        &[Term::Hamiltonian(h.clone()), Term::Dissipator { ops: ops.to_vec(), kappa: kappa.clone() }],
    )?;
    Ok(gen.apply(rho))
}

/// Lindblad generator of the linear-coupling model: H = H_S + ((1−r)Γ/2){X,P}
/// and the single operator L = αX + βP.
pub fn linear_lme_generator(ops: &FockOperators, c: &LinearLmeCoefficients, r: f64) -> Result<Generator, FockError> {
    let (alpha, beta) = lindblad_alpha_beta(c)?;
    let l = &ops.x * Complex64::new(alpha, 0.0) + &ops.p * beta;
    let h = ops.oscillator_hamiltonian() + &ops.xp_anti * Complex64::new(0.5 * (1.0 - r) * c.gamma, 0.0);
    Generator::new(
        ops.dim,
        &[Term::Hamiltonian(h), Term::Dissipator { ops: vec![l], kappa: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)) }],
    )
}

/// Born–Markov generator: −i[H_S,ρ] − iΓ[X,{P,ρ}] − (D_XX/2)[X,[X,ρ]] − D_XP[X,[P,ρ]].
/// With `with_position_diffusion` the −(D_PP/2)[P,[P,ρ]] term is added, which
/// is the linear Lindblad generator at r = 0 written in commutator form.
pub fn linear_commutator_generator(ops: &FockOperators, c: &LinearLmeCoefficients, with_position_diffusion: bool) -> Result<Generator, FockError> {
    let mut terms = vec![
        Term::Hamiltonian(ops.oscillator_hamiltonian()),
        Term::CommutatorAnticommutator { coef: c.gamma, a: ops.x.clone(), b: ops.p.clone() },
        Term::DoubleCommutator { coef: 0.5 * c.d_xx, a: ops.x.clone(), b: ops.x.clone() },
        Term::DoubleCommutator { coef: c.d_xp, a: ops.x.clone(), b: ops.p.clone() },
    ];
    if with_position_diffusion {
        terms.push(Term::DoubleCommutator { coef: 0.5 * c.d_pp, a: ops.p.clone(), b: ops.p.clone() });
    }
    Generator::new(ops.dim, &terms)
}

/// Quadratic-coupling generator in commutator form, with K = {X,P}:
/// −i[H_S,ρ] − Σ D-terms [A,[B,ρ]] − i Σ C-terms [A,{B,ρ}].
pub fn quadratic_commutator_terms(ops: &FockOperators, q: &QuadraticLmeCoefficients) -> Vec<Term> {
    let (x2, p2, k) = (&ops.x2, &ops.p2, &ops.xp_anti);
    let dc = |coef: f64, a: &CMat, b: &CMat| Term::DoubleCommutator { coef, a: a.clone(), b: b.clone() };
    let ca = |coef: f64, a: &CMat, b: &CMat| Term::CommutatorAnticommutator { coef, a: a.clone(), b: b.clone() };
    vec![
        Term::Hamiltonian(ops.oscillator_hamiltonian()),
        dc(0.5 * q.d_mu, x2, x2),
        dc(0.5 * q.d_nu, k, k),
        dc(0.5 * q.d_eps, p2, p2),
        dc(q.d_munu, x2, k),
        dc(q.d_mueps, x2, p2),
        dc(q.d_epsnu, p2, k),
        ca(q.c_munu, x2, k),
        ca(q.c_mueps, x2, p2),
        ca(q.c_epsnu, p2, k),
    ]
}

pub fn quadratic_commutator_generator(ops: &FockOperators, q: &QuadraticLmeCoefficients) -> Result<Generator, FockError> {
    Generator::new(ops.dim, &quadratic_commutator_terms(ops, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_oracle::operators::build_operators;
    use crate::fock_oracle::DensityMatrix;

    fn one() -> DMatrix<Complex64> {
        DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))
    }

    #[test]
    fn pure_hamiltonian_flow_is_traceless() {
        let ops = build_operators(8).unwrap();
        let rho = DensityMatrix::thermal(8, 1.0).unwrap().data;
        let d = lindblad_rhs(&rho, &ops.x2, &[ops.a.clone()], &DMatrix::from_element(1, 1, ZERO)).unwrap();
        assert!(d.trace().norm() < 1e-13);
    }

    #[test]
    fn photon_loss_rate() {
        let ops = build_operators(6).unwrap();
        let rho = DensityMatrix::fock(6, 1).unwrap().data;
        let zero_h = DMatrix::from_element(6, 6, ZERO);
        let d = lindblad_rhs(&rho, &zero_h, &[ops.a.clone()], &one()).unwrap();
        let dn = DensityMatrix { data: d.clone() }.expect(&ops.number);
        assert!((dn.re + 1.0).abs() < 1e-14);
        assert!(d.trace().norm() < 1e-13);
    }

    #[test]
    fn indefinite_kossakowski_rejected() {
        let ops = build_operators(4).unwrap();
        let kappa = DMatrix::from_row_slice(2, 2, &[Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)]);
        let r = lindblad_rhs(&ops.identity, &ops.identity, &[ops.x.clone(), ops.p.clone()], &kappa);
        assert!(matches!(r, Err(FockError::NotPositive(_))));
    }

    #[test]
    fn lindblad_at_zero_counter_term_equals_commutator_form() {
        // the dissipator of αX + βP produces a −(Γ/2){X,P} shift that the
        // r = 0 Hamiltonian cancels; truncation only matters near the top level,
        // so the test state lives on the lowest levels
        let dim = 12;
        let ops = build_operators(dim).unwrap();
        let c = LinearLmeCoefficients { gamma: 0.3, d_xx: 1.2, d_xp: -0.4, d_pp: (0.09 + 0.16) / 1.2 };
        let a = linear_lme_generator(&ops, &c, 0.0).unwrap();
        let b = linear_commutator_generator(&ops, &c, true).unwrap();
        let mut rho = DMatrix::from_element(dim, dim, ZERO);
        for i in 0..5 {
            for j in 0..5 {
                rho[(i, j)] = Complex64::new(1.0 / (1.0 + (i + j) as f64), 0.1 * (i as f64 - j as f64));
            }
        }
        assert!((a.apply(&rho) - b.apply(&rho)).norm() < 1e-12);
        assert!(a.is_lindblad_form() && !b.is_lindblad_form());
    }
}
