//! Gaussian (Wick) closure of the second moments under quadratic coupling.
//!
//! State variables are δ_x², δ_p² and c = δ_x δ_p ρ. Written in c the
//! right-hand sides are polynomials, so nothing is singular at ρ = 0.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::QuadraticLmeCoefficients;
use crate::integrate::{self, Control, IntegrateError, Options};
use crate::linear_dynamics::GaussianState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticClosureState {
    pub dx2: f64,
    pub dp2: f64,
    pub c: f64,
}

impl QuadraticClosureState {
    pub const GROUND: QuadraticClosureState = QuadraticClosureState { dx2: 1.0, dp2: 1.0, c: 0.0 };

    pub fn from_gaussian(s: &GaussianState) -> Self {
        QuadraticClosureState { dx2: s.dx2, dp2: s.dp2, c: s.c() }
    }

    pub fn to_gaussian(&self) -> GaussianState {
        GaussianState::from_c(self.dx2, self.dp2, self.c)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx2, self.dp2, self.c]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        QuadraticClosureState { dx2: a[0], dp2: a[1], c: a[2] }
    }

    /// δ_x²δ_p² − c² = δ_x²δ_p²(1 − ρ²).
    pub fn determinant(&self) -> f64 {
        self.dx2 * self.dp2 - self.c * self.c
    }

    pub fn is_valid(&self) -> bool {
        self.dx2 > 0.0 && self.dp2 > 0.0 && self.c * self.c <= self.dx2 * self.dp2 && self.c.is_finite()
    }

    /// Relative distance used to decide whether two roots lie on the same
    /// branch.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let d = Vector3::from(self.as_array()) - Vector3::from(other.as_array());
        d.norm() / Vector3::from(other.as_array()).norm().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClosureTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuadraticClosureState>,
}

impl ClosureTrajectory {
    /// Smallest δ_x²δ_p²(1 − ρ²) along the trajectory.
    pub fn min_determinant(&self) -> f64 {
        self.states.iter().map(|s| s.determinant()).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergenceStatus {
    Converged,
    Oscillatory,
    Diverged,
}

impl ConvergenceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvergenceStatus::Converged => "converged",
            ConvergenceStatus::Oscillatory => "oscillatory",
            ConvergenceStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub status: ConvergenceStatus,
    pub terminal: Option<QuadraticClosureState>,
    pub window_variation: f64,
    pub t_reached: f64,
}

#[derive(Debug, Error)]
pub enum ClosureError {
    #[error("state collapse at t = {t}: {state:?}")]
    StateCollapse {
        t: f64,
        state: QuadraticClosureState,
        partial: ClosureTrajectory,
    },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("integration failed: {0}")]
    Integration(#[from] IntegrateError),
    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("branch lost at path index {index}: relative jump {jump}")]
    BranchLoss {
        index: usize,
        jump: f64,
        partial: Vec<StationaryPoint>,
    },
    #[error("Newton failure at path index {index}: {source}")]
    NewtonFailure {
        index: usize,
        #[source]
        source: Box<ClosureError>,
        partial: Vec<StationaryPoint>,
    },
}

impl ClosureError {
    /// Short machine-readable reason code.
    pub fn reason_code(&self) -> &'static str {
        match self {
            ClosureError::StateCollapse { .. } => "state-collapse",
            ClosureError::BranchLoss { .. } => "branch-loss",
            ClosureError::NewtonFailure { .. } | ClosureError::SingularJacobian { .. } | ClosureError::NewtonDiverged { .. } => {
                "newton-failure"
            }
            ClosureError::Integration(_) => "integration-failure",
            ClosureError::InvalidInput(_) => "invalid-input",
        }
    }
}

/// (f₁, f₂, f₃), with dδ_x²/dt = 2f₁, dδ_p²/dt = 2f₂, dc/dt = −f₃.
pub fn closure_terms(s: &QuadraticClosureState, q: &QuadraticLmeCoefficients) -> [f64; 3] {
    let (x, p, c) = (s.dx2, s.dp2, s.c);
    let wick = x * p + 2.0 * c * c;
    let f1 = 4.0 * q.c_epsnu * (1.0 + wick) + 2.0 * q.d_eps * p + 4.0 * q.d_nu * x - c;
    let f2 = 2.0 * q.d_mu * x - 4.0 * q.c_munu + 6.0 * q.c_mueps * c * p + c + 4.0 * q.d_nu * p - 4.0 * q.d_mueps * p
        - 4.0 * q.c_munu * wick;
    let f3 = 4.0 * q.c_mueps + p - 8.0 * q.d_epsnu * p + 12.0 * q.c_munu * c * x + 8.0 * q.d_mueps * c
        - 12.0 * q.c_epsnu * c * p
        - x
        - 8.0 * q.d_munu * x
        - 2.0 * q.c_mueps * wick;
    [f1, f2, f3]
}

/// Time derivative of (δ_x², δ_p², c).
pub fn closure_rhs(s: &QuadraticClosureState, q: &QuadraticLmeCoefficients) -> Result<[f64; 3], ClosureError> {
    if !(s.dx2 > 0.0 && s.dp2 > 0.0) {
        return Err(ClosureError::StateCollapse { t: f64::NAN, state: *s, partial: ClosureTrajectory::default() });
    }
    Ok(flow(s, q))
}

fn flow(s: &QuadraticClosureState, q: &QuadraticLmeCoefficients) -> [f64; 3] {
    let [f1, f2, f3] = closure_terms(s, q);
    [2.0 * f1, 2.0 * f2, -f3]
}

/// Jacobian of [`closure_rhs`] with respect to (δ_x², δ_p², c).
pub fn closure_jacobian(s: &QuadraticClosureState, q: &QuadraticLmeCoefficients) -> Matrix3<f64> {
    let (x, p, c) = (s.dx2, s.dp2, s.c);
    let j1 = [
        4.0 * q.c_epsnu * p + 4.0 * q.d_nu,
        4.0 * q.c_epsnu * x + 2.0 * q.d_eps,
        16.0 * q.c_epsnu * c - 1.0,
    ];
    let j2 = [
        2.0 * q.d_mu - 4.0 * q.c_munu * p,
        6.0 * q.c_mueps * c + 4.0 * q.d_nu - 4.0 * q.d_mueps - 4.0 * q.c_munu * x,
        6.0 * q.c_mueps * p + 1.0 - 16.0 * q.c_munu * c,
    ];
    let j3 = [
        12.0 * q.c_munu * c - 1.0 - 8.0 * q.d_munu - 2.0 * q.c_mueps * p,
        1.0 - 8.0 * q.d_epsnu - 12.0 * q.c_epsnu * c - 2.0 * q.c_mueps * x,
        12.0 * q.c_munu * x + 8.0 * q.d_mueps - 12.0 * q.c_epsnu * p - 8.0 * q.c_mueps * c,
    ];
    Matrix3::new(
        2.0 * j1[0], 2.0 * j1[1], 2.0 * j1[2],
        2.0 * j2[0], 2.0 * j2[1], 2.0 * j2[2],
        -j3[0], -j3[1], -j3[2],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureOptions {
    pub tol: f64,
    /// Output intervals over [0, t_max].
    pub samples: usize,
    /// Trailing fraction of the run used for the convergence test.
    pub window_fraction: f64,
    pub convergence_threshold: f64,
    /// Any variable beyond this magnitude counts as divergence. The cubic
    /// terms make a runaway variance stiff, so the cap is kept moderate.
    pub blow_up: f64,
    /// Second-half to first-half range ratio above which a bounded-looking
    /// window is classified as growing.
    pub growth_ratio: f64,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            tol: 1e-10,
            samples: 4000,
            window_fraction: 0.2,
            convergence_threshold: 1e-6,
            blow_up: 1e5,
            growth_ratio: 1.5,
        }
    }
}

pub fn evolve_closure(
    init: QuadraticClosureState,
    q: &QuadraticLmeCoefficients,
    t_max: f64,
    tol: f64,
) -> Result<(ClosureTrajectory, ConvergenceReport), ClosureError> {
    evolve_closure_with(init, q, t_max, &ClosureOptions { tol, ..ClosureOptions::default() })
}

enum Halt {
    Collapse,
    BlowUp,
}

pub fn evolve_closure_with(
    init: QuadraticClosureState,
    q: &QuadraticLmeCoefficients,
    t_max: f64,
    opts: &ClosureOptions,
) -> Result<(ClosureTrajectory, ConvergenceReport), ClosureError> {
    if !(t_max > 0.0) {
        return Err(ClosureError::InvalidInput("t_max must be positive"));
    }
    if !init.is_valid() {
        return Err(ClosureError::InvalidInput("initial state is not valid"));
    }
    let times = integrate::uniform_times(t_max, opts.samples);
    let mut halt = None;
    let res = integrate::dopri5(
        |_, y| flow(&QuadraticClosureState::from_array(*y), q),
        0.0,
        init.as_array(),
        &times,
        &Options::with_tol(opts.tol),
        |_, y| {
            let s = QuadraticClosureState::from_array(*y);
            if y.iter().any(|v| !v.is_finite() || v.abs() > opts.blow_up) {
                halt = Some(Halt::BlowUp);
                Control::Stop
            } else if !s.is_valid() {
                halt = Some(Halt::Collapse);
                Control::Stop
            } else {
                Control::Continue
            }
        },
    );
    let sol = match res {
        Ok(sol) => sol,
        Err(IntegrateError::StepUnderflow { t, .. }) => {
            // finite-time blow-up of the cubic flow
            return Ok((
                ClosureTrajectory::default(),
                ConvergenceReport { status: ConvergenceStatus::Diverged, terminal: None, window_variation: f64::INFINITY, t_reached: t },
            ));
        }
        Err(e) => return Err(e.into()),
    };
    let traj = ClosureTrajectory {
        times: sol.times.clone(),
        states: sol.states.iter().map(|y| QuadraticClosureState::from_array(*y)).collect(),
    };
    if let Some((t, y)) = sol.stopped {
        let state = QuadraticClosureState::from_array(y);
        return match halt {
            Some(Halt::Collapse) => Err(ClosureError::StateCollapse { t, state, partial: traj }),
            _ => Ok((
                traj,
                ConvergenceReport { status: ConvergenceStatus::Diverged, terminal: None, window_variation: f64::INFINITY, t_reached: t },
            )),
        };
    }
    let report = classify(&traj, t_max, opts);
    Ok((traj, report))
}

fn window_ranges(states: &[QuadraticClosureState]) -> f64 {
    let n = states.len() as f64;
    let mean = |f: &dyn Fn(&QuadraticClosureState) -> f64| states.iter().map(f).sum::<f64>() / n;
    let scales = [
        mean(&|s| s.dx2.abs()),
        mean(&|s| s.dp2.abs()),
        mean(&|s| (s.dx2 * s.dp2).abs().sqrt()),
    ];
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        let vals = states.iter().map(|s| s.as_array()[k]);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        worst = worst.max((hi - lo) / scales[k].max(f64::MIN_POSITIVE));
    }
    worst
}

fn classify(traj: &ClosureTrajectory, t_max: f64, opts: &ClosureOptions) -> ConvergenceReport {
    let start = t_max * (1.0 - opts.window_fraction);
    let first = traj.times.iter().position(|&t| t >= start).unwrap_or(traj.times.len());
    let window = &traj.states[first..];
    let terminal = traj.states.last().copied();
    if window.len() < 4 {
        return ConvergenceReport { status: ConvergenceStatus::Oscillatory, terminal: None, window_variation: f64::INFINITY, t_reached: t_max };
    }
    let variation = window_ranges(window);
    if variation < opts.convergence_threshold {
        return ConvergenceReport { status: ConvergenceStatus::Converged, terminal, window_variation: variation, t_reached: t_max };
    }
    let half = window.len() / 2;
    let early = window_ranges(&window[..half]);
    let late = window_ranges(&window[half..]);
    let status = if late > opts.growth_ratio * early {
        ConvergenceStatus::Diverged
    } else {
        ConvergenceStatus::Oscillatory
    };
    ConvergenceReport { status, terminal: None, window_variation: variation, t_reached: t_max }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub state: QuadraticClosureState,
    /// Max-norm of the time derivative at `state`.
    pub residual: f64,
    pub iterations: usize,
    /// Largest real part of the flow Jacobian's eigenvalues.
    pub max_real_eigenvalue: f64,
}

impl StationaryPoint {
    pub fn is_stable(&self) -> bool {
        self.max_real_eigenvalue < 0.0
    }
}

pub const NEWTON_MAX_ITER: usize = 200;
pub const NEWTON_TOL: f64 = 1e-12;
const LINE_SEARCH_HALVINGS: usize = 30;

fn residual_norm(s: &QuadraticClosureState, q: &QuadraticLmeCoefficients) -> f64 {
    flow(s, q).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Residual threshold at state `s`: 1e-12, loosened by the size of the
/// state because the right-hand sides are quadratic in it.
fn newton_threshold(s: &QuadraticClosureState) -> f64 {
    let m = s.as_array().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    NEWTON_TOL * m * m
}

/// Damped Newton iteration for a zero of the closure flow.
pub fn stationary_newton(q: &QuadraticLmeCoefficients, guess: QuadraticClosureState) -> Result<StationaryPoint, ClosureError> {
    if !guess.is_valid() {
        return Err(ClosureError::InvalidInput("Newton guess is not a valid state"));
    }
    let mut s = guess;
    let mut res = residual_norm(&s, q);
    for iteration in 0..NEWTON_MAX_ITER {
        if res <= newton_threshold(&s) {
            return Ok(finish(s, q, res, iteration));
        }
        let jac = closure_jacobian(&s, q);
        let f = Vector3::from(flow(&s, q));
        let step = jac.lu().solve(&(-f)).ok_or(ClosureError::SingularJacobian { iteration })?;
        if !step.iter().all(|v| v.is_finite()) {
            return Err(ClosureError::SingularJacobian { iteration });
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=LINE_SEARCH_HALVINGS {
            let trial = QuadraticClosureState {
                dx2: s.dx2 + lambda * step[0],
                dp2: s.dp2 + lambda * step[1],
                c: s.c + lambda * step[2],
            };
            if trial.dx2 > 0.0 && trial.dp2 > 0.0 {
                let r = residual_norm(&trial, q);
                if r < res {
                    accepted = Some((trial, r));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, r)) => {
                s = trial;
                res = r;
            }
            None => {
                // no decrease possible: either at roundoff level or stuck
                if res <= 1e3 * newton_threshold(&s) {
                    return Ok(finish(s, q, res, iteration));
                }
                return Err(ClosureError::NewtonDiverged { iterations: iteration, residual: res });
            }
        }
    }
    if res <= newton_threshold(&s) {
        return Ok(finish(s, q, res, NEWTON_MAX_ITER));
    }
    Err(ClosureError::NewtonDiverged { iterations: NEWTON_MAX_ITER, residual: res })
}

fn finish(s: QuadraticClosureState, q: &QuadraticLmeCoefficients, residual: f64, iterations: usize) -> StationaryPoint {
    let eig = closure_jacobian(&s, q).complex_eigenvalues();
    let max_real_eigenvalue = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    StationaryPoint { state: s, residual, iterations, max_real_eigenvalue }
}

pub const DEFAULT_MAX_JUMP: f64 = 0.5;

/// Follows one stationary branch along `q_path`, seeding each Newton solve
/// with the previous root.
pub fn cl_branch_continuation(
    q_path: &[QuadraticLmeCoefficients],
    start: QuadraticClosureState,
    max_jump: f64,
) -> Result<Vec<StationaryPoint>, ClosureError> {
    let mut out: Vec<StationaryPoint> = Vec::with_capacity(q_path.len());
    let mut seed = start;
    for (index, q) in q_path.iter().enumerate() {
        let root = match stationary_newton(q, seed) {
            Ok(r) => r,
            Err(e) => {
                return Err(ClosureError::NewtonFailure { index, source: Box::new(e), partial: out });
            }
        };
        if index > 0 {
            let jump = root.state.relative_distance(&seed);
            if jump > max_jump {
                return Err(ClosureError::BranchLoss { index, jump, partial: out });
            }
        }
        seed = root.state;
        out.push(root);
    }
    Ok(out)
}
