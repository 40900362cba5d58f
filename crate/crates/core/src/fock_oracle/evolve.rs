use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMat, DensityMatrix, FockError, Generator};

/// Population of the top two levels above which a run is untrusted.
pub const TRUNCATION_GATE: f64 = 1e-6;
/// Largest dimension for which the Taylor propagator is the default.
pub const TAYLOR_MAX_DIM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagator {
    /// Classical fourth-order Runge–Kutta with fixed step.
    Rk4,
    /// Taylor series of exp(tℒ) applied to ρ, to machine precision per step.
    Taylor,
}

impl Propagator {
    pub fn default_for(dim: usize) -> Self {
        if dim <= TAYLOR_MAX_DIM {
            Propagator::Taylor
        } else {
            Propagator::Rk4
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    /// Largest population of the two highest Fock levels seen during the run.
    pub max_top_population: f64,
    pub trusted: bool,
    /// End of the run; earlier than t_max when the observer stopped it.
    pub t_reached: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_max: f64,
    pub dt: f64,
    pub propagator: Propagator,
    /// Interval between observer calls (rounded to whole steps).
    pub sample_every: f64,
}

impl EvolveOptions {
    pub fn new(dim: usize, t_max: f64, dt: f64) -> Self {
        EvolveOptions { t_max, dt, propagator: Propagator::default_for(dim), sample_every: t_max }
    }
}

pub fn evolve_density(rho0: &DensityMatrix, gen: &Generator, t_max: f64, dt: f64) -> Result<(DensityMatrix, TruncationReport), FockError> {
    evolve_density_with(rho0, gen, &EvolveOptions::new(rho0.dim(), t_max, dt), |_, _| true)
}

/// Propagates `rho0`, calling `observer(t, ρ)` at t = 0, every
/// `sample_every` and at the end; the run stops early when the observer
/// returns false. ρ is re-Hermitized after every step.
pub fn evolve_density_with<F>(
    rho0: &DensityMatrix,
    gen: &Generator,
    opts: &EvolveOptions,
    mut observer: F,
) -> Result<(DensityMatrix, TruncationReport), FockError>
where
    F: FnMut(f64, &DensityMatrix) -> bool,
{
    if rho0.dim() != gen.dim() {
        return Err(FockError::Dimension(rho0.dim()));
    }
    if !(opts.t_max >= 0.0 && opts.dt > 0.0) {
        return Err(FockError::InvalidInput("t_max must be non-negative and dt positive"));
    }
    let steps = (opts.t_max / opts.dt).ceil() as usize;
    let dt = if steps > 0 { opts.t_max / steps as f64 } else { opts.dt };
    let every = ((opts.sample_every / dt).round() as usize).max(1);
    let mut rho = rho0.clone();
    let mut top = rho.top_population(2);
    let mut t_reached = 0.0;
    if !observer(0.0, &rho) {
        return Ok((rho, TruncationReport { max_top_population: top, trusted: top <= TRUNCATION_GATE, t_reached }));
    }
    for k in 1..=steps {
        rho.data = match opts.propagator {
            Propagator::Rk4 => rk4_step(gen, &rho.data, dt),
            Propagator::Taylor => taylor_step(gen, &rho.data, dt),
        };
        rho.rehermitize();
        top = top.max(rho.top_population(2));
        if !rho.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(FockError::NonFinite { t: k as f64 * dt });
        }
        t_reached = k as f64 * dt;
        if (k % every == 0 || k == steps) && !observer(t_reached, &rho) {
            break;
        }
    }
    Ok((rho, TruncationReport { max_top_population: top, trusted: top <= TRUNCATION_GATE, t_reached }))
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rk4_step(gen: &Generator, rho: &CMat, dt: f64) -> CMat {
    let k1 = gen.apply(rho);
    let k2 = gen.apply(&(rho + &k1 * re(0.5 * dt)));
    let k3 = gen.apply(&(rho + &k2 * re(0.5 * dt)));
    let k4 = gen.apply(&(rho + &k3 * re(dt)));
    rho + (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(dt / 6.0)
}

fn taylor_step(gen: &Generator, rho: &CMat, dt: f64) -> CMat {
    // sub-steps keep h·‖ℒ‖ ≤ 1 so the series converges without cancellation
    let sub = (dt * gen.norm_bound()).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let mut state = rho.clone();
    for _ in 0..sub {
        let mut term = state.clone();
        let mut acc = state.clone();
        let scale = state.norm();
        for j in 1..=60 {
            term = gen.apply(&term) * re(h / j as f64);
            acc += &term;
            if term.norm() <= 1e-17 * scale {
                break;
            }
        }
        state = acc;
    }
    state
}
