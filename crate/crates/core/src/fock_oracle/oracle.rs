//! End-to-end oracle runs: evolve a density matrix under the linear-coupling
//! generators and compare with the moment equations.

use serde::{Deserialize, Serialize};

use super::evolve::{evolve_density_with, EvolveOptions, Propagator};
use super::moments::{moments_from_density, SymmetricMoments, EIGENVALUE_TOL, HUP_SLACK};
use super::{build_operators, linear_commutator_generator, linear_lme_generator, DensityMatrix, FockError, TRUNCATION_GATE};
use crate::coefficients::{LinearLmeCoefficients, ModelParams};
use crate::integrate;
use crate::linear_dynamics::{evolve_moments_at, stationary_gaussian, FirstMoments, GaussianState};

pub const DEFAULT_LINEAR_DIM: usize = 60;
pub const DEFAULT_QUADRATIC_DIM: usize = 100;
pub const MOMENT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub params: ModelParams,
    pub dim: usize,
    pub t_max: f64,
    pub dt: f64,
    /// Spacing of the diagnostic samples.
    pub sample_every: f64,
    /// Trajectory comparison is made for t ≤ `track_until`.
    pub track_until: f64,
    pub propagator: Propagator,
}

impl OracleConfig {
    pub fn new(params: ModelParams, dim: usize, t_max: f64) -> Self {
        OracleConfig {
            params,
            dim,
            t_max,
            dt: 0.01,
            sample_every: 1.0,
            track_until: t_max.min(30.0),
            propagator: Propagator::default_for(dim),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassFlags {
    pub trace: bool,
    pub hermitian: bool,
    pub positive: bool,
    pub truncation_trusted: bool,
    pub moments: bool,
    pub hup: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.trace && self.hermitian && self.positive && self.truncation_trusted && self.moments && self.hup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub params: ModelParams,
    pub dim: usize,
    pub t_max: f64,
    /// Largest |Tr ρ − 1| over the samples.
    pub trace_err: f64,
    pub hermiticity_err: f64,
    /// Smallest eigenvalue over the samples.
    pub min_eig: f64,
    pub trunc_pop: f64,
    pub moments_final: SymmetricMoments,
    pub moments_reference: SymmetricMoments,
    /// Relative deviation of the terminal moments from the stationary state.
    pub stationary_rel_err: f64,
    /// Largest relative deviation from the integrated moment trajectory.
    pub trajectory_rel_err: f64,
    /// Smallest σ_X σ_P over the samples.
    pub hup_product: f64,
    pub pass_flags: PassFlags,
}

/// Relative distance of centered second moments; the covariance is scaled
/// by σ_Xσ_P of the reference.
pub fn moment_relative_error(m: &SymmetricMoments, reference: &GaussianState) -> f64 {
    let (x2, xp, p2) = reference.symmetric_moments();
    let cross = (x2 * p2).sqrt();
    [(m.var_x() - x2) / x2, (m.var_p() - p2) / p2, (m.cov_xp() - xp) / cross]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

fn symmetric(s: &GaussianState) -> SymmetricMoments {
    let (x2, xp, p2) = s.symmetric_moments();
    SymmetricMoments { x: 0.0, p: 0.0, x2, xp, p2 }
}

/// Ground state evolved under the Lindblad generator with r = 0.
pub fn run_linear_oracle(cfg: &OracleConfig) -> Result<OracleReport, FockError> {
    let c = LinearLmeCoefficients::from_params(&cfg.params)?;
    let ops = build_operators(cfg.dim)?;
    let gen = linear_lme_generator(&ops, &c, 0.0)?;
    let stationary = stationary_gaussian(&c).map_err(|e| FockError::Reference(e.to_string()))?;
    let n_track = (cfg.track_until / cfg.sample_every).round().max(1.0) as usize;
    let track_times = integrate::uniform_times(n_track as f64 * cfg.sample_every, n_track);
    let reference = evolve_moments_at(FirstMoments::default(), GaussianState::GROUND, &c, 0.0, &track_times, 1e-11)
        .map_err(|e| FockError::Reference(e.to_string()))?;

    let mut trace_err = 0.0f64;
    let mut herm_err = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut hup = f64::INFINITY;
    let mut traj_err = 0.0f64;
    let mut observe_err: Option<FockError> = None;
    let opts = EvolveOptions { t_max: cfg.t_max, dt: cfg.dt, propagator: cfg.propagator, sample_every: cfg.sample_every };
    let (rho, trunc) = evolve_density_with(&DensityMatrix::ground(cfg.dim)?, &gen, &opts, |t, rho| {
        trace_err = trace_err.max((rho.trace() - 1.0).norm());
        herm_err = herm_err.max(rho.hermiticity_error());
        min_eig = min_eig.min(rho.min_eigenvalue());
        match moments_from_density(rho, &ops) {
            Ok(m) => {
                hup = hup.min((m.var_x() * m.var_p()).max(0.0).sqrt());
                if t <= cfg.track_until + 1e-9 {
                    let k = (t / cfg.sample_every).round() as usize;
                    if let Some(s) = reference.second.get(k) {
                        traj_err = traj_err.max(moment_relative_error(&m, s));
                    }
                }
            }
            Err(e) => observe_err = Some(e),
        }
        true
    })?;
    if let Some(e) = observe_err {
        return Err(e);
    }
    let final_m = moments_from_density(&rho, &ops)?;
    let stationary_rel_err = moment_relative_error(&final_m, &stationary);
    let pass_flags = PassFlags {
        trace: trace_err < 1e-10,
        hermitian: herm_err <= 1e-12,
        positive: min_eig >= EIGENVALUE_TOL,
        truncation_trusted: trunc.trusted,
        moments: stationary_rel_err < MOMENT_TOL,
        hup: hup >= 0.5 - HUP_SLACK,
    };
    Ok(OracleReport {
        params: cfg.params,
        dim: cfg.dim,
        t_max: cfg.t_max,
        trace_err,
        hermiticity_err: herm_err,
        min_eig,
        trunc_pop: trunc.max_top_population,
        moments_final: final_m,
        moments_reference: symmetric(&stationary),
        stationary_rel_err,
        trajectory_rel_err: traj_err,
        hup_product: hup,
        pass_flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmmeContrastReport {
    pub params: ModelParams,
    pub dim: usize,
    pub t_max: f64,
    pub min_eig: f64,
    pub t_min_eig: f64,
    /// Smallest σ_X σ_P seen, computed from moments whether or not ρ ≥ 0.
    pub min_hup_product: f64,
    pub trunc_pop: f64,
    /// End of the trusted window. The Born–Markov generator is not
    /// dissipative on the truncated space, so roundoff in the top levels
    /// grows without bound; the run stops once they are populated.
    pub t_trusted: f64,
    pub positivity_violated: bool,
    pub hup_violated: bool,
}

/// Ground state evolved under the Born–Markov generator, inspected after
/// every step until the top levels exceed the truncation gate.
pub fn run_bmme_contrast(cfg: &OracleConfig) -> Result<BmmeContrastReport, FockError> {
    let c = LinearLmeCoefficients::from_params(&cfg.params)?;
    let ops = build_operators(cfg.dim)?;
    let gen = linear_commutator_generator(&ops, &c, false)?;
    let mut min_eig = f64::INFINITY;
    let mut t_min = 0.0;
    let mut hup = f64::INFINITY;
    let mut t_trusted = 0.0;
    let mut top = 0.0f64;
    let opts = EvolveOptions { t_max: cfg.t_max, dt: cfg.dt, propagator: cfg.propagator, sample_every: cfg.dt };
    evolve_density_with(&DensityMatrix::ground(cfg.dim)?, &gen, &opts, |t, rho| {
        let pop = rho.top_population(2);
        if pop > TRUNCATION_GATE {
            return false;
        }
        top = top.max(pop);
        t_trusted = t;
        let e = rho.min_eigenvalue();
        if e < min_eig {
            min_eig = e;
            t_min = t;
        }
        if let Ok(m) = moments_from_density(rho, &ops) {
            let prod = m.var_x() * m.var_p();
            hup = hup.min(prod.signum() * prod.abs().sqrt());
        }
        true
    })?;
    Ok(BmmeContrastReport {
        params: cfg.params,
        dim: cfg.dim,
        t_max: cfg.t_max,
        min_eig,
        t_min_eig: t_min,
        min_hup_product: hup,
        trunc_pop: top,
        t_trusted,
        positivity_violated: min_eig < -1e-6,
        hup_violated: hup < 0.5,
    })
}
