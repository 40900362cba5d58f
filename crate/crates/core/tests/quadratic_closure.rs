//! The Gaussian closure against two independent evaluations of the same
//! generator: normal-ordered ladder algebra with Wick contractions, and a
//! truncated Fock-space density matrix.

use num_complex::Complex64;
use proptest::prelude::*;

use qbm_core::coefficients::{quadratic_lme_coefficients, ModelParams, QuadraticBaseCoefficients, QuadraticLmeCoefficients};
use qbm_core::fock_oracle::ladder::{heisenberg_rate, CommutatorTerm, LadderGaussian, NormalPoly};
use qbm_core::fock_oracle::{build_operators, quadratic_commutator_generator, DensityMatrix};
use qbm_core::linear_dynamics::{FirstMoments, GaussianState};
use qbm_core::quadratic_dynamics::{closure_rhs, evolve_closure, QuadraticClosureState};

fn ladder_terms(q: &QuadraticLmeCoefficients) -> Vec<CommutatorTerm> {
    let x = NormalPoly::x();
    let p = NormalPoly::p();
    let x2 = &x * &x;
    let p2 = &p * &p;
    let k = x.anticommutator(&p);
    let h = (&x2 + &p2).scale(Complex64::new(0.5, 0.0));
    let dc = |coef: f64, a: &NormalPoly, b: &NormalPoly| CommutatorTerm::DoubleCommutator { coef, a: a.clone(), b: b.clone() };
    let ca = |coef: f64, a: &NormalPoly, b: &NormalPoly| CommutatorTerm::CommutatorAnticommutator { coef, a: a.clone(), b: b.clone() };
    vec![
        CommutatorTerm::Hamiltonian(h),
        dc(0.5 * q.d_mu, &x2, &x2),
        dc(0.5 * q.d_nu, &k, &k),
        dc(0.5 * q.d_eps, &p2, &p2),
        dc(q.d_munu, &x2, &k),
        dc(q.d_mueps, &x2, &p2),
        dc(q.d_epsnu, &p2, &k),
        ca(q.c_munu, &x2, &k),
        ca(q.c_mueps, &x2, &p2),
        ca(q.c_epsnu, &p2, &k),
    ]
}

/// Symmetric-moment rates (⟨X²⟩, ⟨{X,P}⟩/2, ⟨P²⟩) implied by a closure
/// derivative of (δ_x², δ_p², c).
fn implied_rates(d: [f64; 3]) -> [f64; 3] {
    [0.5 * d[0], -0.5 * d[2], 0.5 * d[1]]
}

fn wick_rates(q: &QuadraticLmeCoefficients, s: &GaussianState) -> [f64; 3] {
    let terms = ladder_terms(q);
    let g = LadderGaussian::from_state(s);
    let x = NormalPoly::x();
    let p = NormalPoly::p();
    let obs = [&x * &x, x.anticommutator(&p), &p * &p];
    let r: Vec<f64> = obs.iter().map(|o| heisenberg_rate(&terms, o, &g).re).collect();
    [r[0], 0.5 * r[1], r[2]]
}

fn operator_coefficients(m: (f64, f64), n: (f64, f64), e: (f64, f64)) -> QuadraticLmeCoefficients {
    QuadraticLmeCoefficients::from_lindblad_operator(Complex64::new(m.0, m.1), Complex64::new(n.0, n.1), Complex64::new(e.0, e.1))
}

fn state(dx2: f64, dp2: f64, rho: f64) -> GaussianState {
    GaussianState { dx2, dp2, rho }
}

#[test]
fn implied_rate_map_is_the_moment_map() {
    let s = GaussianState::from_c(1.7, 0.9, 0.3);
    let (x2, xp, p2) = s.symmetric_moments();
    assert_eq!(implied_rates([1.7, 0.9, s.c()]), [x2, xp, p2]);
}

#[test]
fn closure_matches_wick_algebra_on_surrogate() {
    let p = ModelParams::new(0.3, 16.0, 4.0).unwrap();
    let q = quadratic_lme_coefficients(&QuadraticBaseCoefficients::linear_analogue_surrogate(&p).unwrap()).unwrap();
    for s in [state(1.0, 1.0, 0.0), state(2.5, 1.3, 0.4), state(0.7, 3.0, -0.6)] {
        let d = closure_rhs(&QuadraticClosureState::from_gaussian(&s), &q).unwrap();
        let (a, b) = (implied_rates(d), wick_rates(&q, &s));
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-12 * (1.0 + b[k].abs()), "{k}: {} vs {}", a[k], b[k]);
        }
    }
}

#[test]
fn closure_matches_fock_space_generator() {
    // for a Gaussian state Wick factorisation is exact, so the closure must
    // reproduce the full generator up to truncation
    let dim = 70;
    let ops = build_operators(dim).unwrap();
    let q = operator_coefficients((0.4, 0.0), (0.1, -0.2), (0.05, 0.15));
    let gen = quadratic_commutator_generator(&ops, &q).unwrap();
    for s in [state(1.4, 1.1, 0.2), state(0.8, 1.6, -0.3)] {
        let rho = DensityMatrix::gaussian(dim, &s, FirstMoments::default()).unwrap();
        let drho = gen.apply(&rho.data);
        let rate = |o: &qbm_core::fock_oracle::CMat| (o * &drho).trace().re;
        let fock = [rate(&ops.x2), 0.5 * rate(&ops.xp_anti), rate(&ops.p2)];
        let d = closure_rhs(&QuadraticClosureState::from_gaussian(&s), &q).unwrap();
        let closure = implied_rates(d);
        for k in 0..3 {
            assert!((fock[k] - closure[k]).abs() < 1e-8, "{k}: {} vs {}", fock[k], closure[k]);
        }
    }
}

#[test]
fn heisenberg_bound_along_surrogate_trajectory() {
    let p = ModelParams::new(0.1, 16.0, 4.0).unwrap();
    let q = quadratic_lme_coefficients(&QuadraticBaseCoefficients::linear_analogue_surrogate(&p).unwrap()).unwrap();
    let (traj, report) = evolve_closure(QuadraticClosureState::GROUND, &q, 600.0, 1e-10).unwrap();
    assert_eq!(report.status.as_str(), "converged");
    assert!(traj.min_determinant() >= 1.0 - 1e-9, "{}", traj.min_determinant());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_equals_wick_for_any_operator(
        m in (0.05f64..1.0, -0.5f64..0.5),
        n in (-0.5f64..0.5, -0.5f64..0.5),
        e in (-0.5f64..0.5, -0.5f64..0.5),
        dx2 in 0.3f64..4.0,
        dp2 in 0.3f64..4.0,
        rho in -0.9f64..0.9,
    ) {
        let q = operator_coefficients(m, n, e);
        let s = state(dx2, dp2, rho);
        let d = closure_rhs(&QuadraticClosureState::from_gaussian(&s), &q).unwrap();
        let (a, b) = (implied_rates(d), wick_rates(&q, &s));
        for k in 0..3 {
            prop_assert!((a[k] - b[k]).abs() < 1e-11 * (1.0 + b[k].abs()));
        }
    }

    #[test]
    fn trace_of_generator_vanishes(
        m in (0.05f64..1.0, -0.5f64..0.5),
        n in (-0.5f64..0.5, -0.5f64..0.5),
    ) {
        let ops = build_operators(12).unwrap();
        let q = operator_coefficients(m, n, (0.1, 0.0));
        let gen = quadratic_commutator_generator(&ops, &q).unwrap();
        let rho = DensityMatrix::thermal(12, 0.5).unwrap();
        prop_assert!(gen.apply(&rho.data).trace().norm() < 1e-12);
    }
}
