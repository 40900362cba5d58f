//! Seeded random checks of the quadratic-operator factorization and the
//! Gaussian dissipator matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qbm_core::fock_oracle::{factorize_quadratic, gaussian_dissipator_matrix, QuadraticLindbladOp, PSD_TOL};
use qbm_core::linear_dynamics::GaussianState;

const RECONSTRUCTION_TOL: f64 = 1e-10;
const RECONSTRUCTION_DIM: usize = 12;

#[derive(Debug, Serialize)]
pub struct RandomCheckReport {
    pub seed: u64,
    pub operators: usize,
    pub non_generic: usize,
    pub max_reconstruction_error: f64,
    pub min_dissipator_eigenvalue: f64,
    pub pass: bool,
}

fn complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Thermal width ν ≥ 1, squeezed by e^{±2s} and rotated by φ.
pub fn random_physical_state(rng: &mut ChaCha8Rng) -> GaussianState {
    let nu = 1.0 + rng.gen_range(0.0..3.0);
    let s: f64 = rng.gen_range(-0.8..0.8);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let (a, b) = (nu * (2.0 * s).exp(), nu * (-2.0 * s).exp());
    let (c, sn) = (phi.cos(), phi.sin());
    let xx = a * c * c + b * sn * sn;
    let pp = a * sn * sn + b * c * c;
    let xp = (a - b) * c * sn;
    GaussianState::from_c(xx, pp, xp)
}

pub fn factorization_checks(n: usize, seed: u64) -> RandomCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = RandomCheckReport {
        seed,
        operators: n,
        non_generic: 0,
        max_reconstruction_error: 0.0,
        min_dissipator_eigenvalue: f64::INFINITY,
        pass: true,
    };
    for _ in 0..n {
        let l = QuadraticLindbladOp {
            alpha_t: complex(&mut rng),
            beta_t: complex(&mut rng),
            gamma_t: complex(&mut rng),
            delta_t: complex(&mut rng),
            eps_t: complex(&mut rng),
            eta_t: complex(&mut rng),
        };
        let state = random_physical_state(&mut rng);
        let Ok(f) = factorize_quadratic(&l) else {
            report.non_generic += 1;
            continue;
        };
        let err = f.reconstruction_error(&l, RECONSTRUCTION_DIM);
        report.max_reconstruction_error = report.max_reconstruction_error.max(err);
        if let Ok(m) = gaussian_dissipator_matrix(&f.d1, &f.d2, &state) {
            report.min_dissipator_eigenvalue = report.min_dissipator_eigenvalue.min(m.min_eigenvalue);
        }
    }
    report.pass = report.non_generic == 0
        && report.max_reconstruction_error < RECONSTRUCTION_TOL
        && report.min_dissipator_eigenvalue >= PSD_TOL;
    report
}
