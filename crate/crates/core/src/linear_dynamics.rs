//! First and second moments under the linear-coupling Lindblad equation.
//!
//! Second moments are carried as δ_x² = 2⟨X²⟩, δ_p² = 2⟨P²⟩ and
//! ρ = −⟨XP⟩_sym/(σ_X σ_P). Internally the integrator works with
//! c = δ_x δ_p ρ = −2⟨XP⟩_sym, which keeps the equations linear.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::LinearLmeCoefficients;
use crate::integrate::{self, Control, IntegrateError, Options};

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("damping Γ = {0} must be positive")]
    NonPositiveDamping(f64),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("integration failed: {0}")]
    Integration(#[from] IntegrateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FirstMoments {
    pub x: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub dx2: f64,
    pub dp2: f64,
    pub rho: f64,
}

impl GaussianState {
    pub const GROUND: GaussianState = GaussianState { dx2: 1.0, dp2: 1.0, rho: 0.0 };

    /// From (δ_x², δ_p², c) with c = δ_x δ_p ρ.
    pub fn from_c(dx2: f64, dp2: f64, c: f64) -> Self {
        let norm = (dx2 * dp2).sqrt();
        let rho = if norm > 0.0 { c / norm } else { 0.0 };
        GaussianState { dx2, dp2, rho }
    }

    /// From symmetric-ordered moments ⟨X²⟩, ⟨XP⟩_sym, ⟨P²⟩.
    pub fn from_symmetric_moments(x2: f64, xp: f64, p2: f64) -> Self {
        Self::from_c(2.0 * x2, 2.0 * p2, -2.0 * xp)
    }

    /// (⟨X²⟩, ⟨XP⟩_sym, ⟨P²⟩).
    pub fn symmetric_moments(&self) -> (f64, f64, f64) {
        (0.5 * self.dx2, -0.5 * self.c(), 0.5 * self.dp2)
    }

    pub fn c(&self) -> f64 {
        self.rho * (self.dx2 * self.dp2).sqrt()
    }

    /// δ_x δ_p.
    pub fn hup_product(&self) -> f64 {
        (self.dx2 * self.dp2).sqrt()
    }

    /// δ_x² δ_p² (1 − ρ²), the Robertson–Schrödinger determinant.
    pub fn determinant(&self) -> f64 {
        self.dx2 * self.dp2 * (1.0 - self.rho * self.rho)
    }

    pub fn is_valid(&self) -> bool {
        self.dx2 > 0.0 && self.dp2 > 0.0 && self.rho.abs() <= 1.0 && self.rho.is_finite()
    }

    /// Robertson–Schrödinger in adimensional form, with a relative slack.
    pub fn is_physical(&self, slack: f64) -> bool {
        self.is_valid() && self.determinant() >= 1.0 - slack
    }
}

/// Time derivatives of (⟨X⟩, ⟨P⟩, δ_x², δ_p², ρ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDerivative {
    pub x: f64,
    pub p: f64,
    pub dx2: f64,
    pub dp2: f64,
    pub rho: f64,
}

impl MomentDerivative {
    pub fn max_abs(&self) -> f64 {
        [self.x, self.p, self.dx2, self.dp2, self.rho]
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTrajectory {
    pub times: Vec<f64>,
    pub first: Vec<FirstMoments>,
    pub second: Vec<GaussianState>,
}

impl MomentTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, FirstMoments, GaussianState)> {
        let i = self.times.len().checked_sub(1)?;
        Some((self.times[i], self.first[i], self.second[i]))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,mean_x,mean_p,dx2,dp2,rho")?;
        for i in 0..self.times.len() {
            let (f, s) = (self.first[i], self.second[i]);
            writeln!(w, "{},{},{},{},{},{}", self.times[i], f.x, f.p, s.dx2, s.dp2, s.rho)?;
        }
        Ok(())
    }
}

/// Right-hand side in (x, p, δ_x², δ_p², c).
pub fn raw_rhs(y: &[f64; 5], c: &LinearLmeCoefficients, r: f64) -> [f64; 5] {
    let g = c.gamma;
    let [x, p, dx2, dp2, cc] = *y;
    [
        p - r * g * x,
        -x - (2.0 - r) * g * p,
        -2.0 * r * g * dx2 - 2.0 * cc + 2.0 * c.d_pp,
        2.0 * cc - (4.0 - 2.0 * r) * g * dp2 + 2.0 * c.d_xx,
        dx2 - dp2 - 2.0 * g * cc + 2.0 * c.d_xp,
    ]
}

/// Moment equations of the Lindblad generator with counter-term weight `r`.
/// Setting `d_pp = 0` gives the Born–Markov dynamics.
pub fn moment_ode_rhs(f: &FirstMoments, s: &GaussianState, c: &LinearLmeCoefficients, r: f64) -> MomentDerivative {
    let norm = (s.dx2 * s.dp2).sqrt();
    let d = raw_rhs(&[f.x, f.p, s.dx2, s.dp2, s.rho * norm], c, r);
    let rho_dot = d[4] / norm - 0.5 * s.rho * (d[2] / s.dx2 + d[3] / s.dp2);
    MomentDerivative { x: d[0], p: d[1], dx2: d[2], dp2: d[3], rho: rho_dot }
}

/// Oscillation frequency β_r = sqrt(1 − Γ²(r−1)²) of the first moments.
/// Returns the negative of the decay-rate splitting κ when overdamped.
pub fn beta_r(gamma: f64, r: f64) -> f64 {
    let arg = 1.0 - gamma * gamma * (r - 1.0) * (r - 1.0);
    if arg >= 0.0 {
        arg.sqrt()
    } else {
        -(-arg).sqrt()
    }
}

/// Frequency in ẍ + 2Γẋ + ω²x = 0, ω² = 1 − r(r−2)Γ².
pub fn effective_frequency(gamma: f64, r: f64) -> f64 {
    (1.0 - r * (r - 2.0) * gamma * gamma).sqrt()
}

/// (cos βt, sin(βt)/β) continued through β = 0 into the overdamped region.
fn propagator_pair(gamma: f64, r: f64, t: f64) -> (f64, f64) {
    let b = beta_r(gamma, r);
    if b > 0.0 {
        ((b * t).cos(), (b * t).sin() / b)
    } else if b < 0.0 {
        let k = -b;
        ((k * t).cosh(), (k * t).sinh() / k)
    } else {
        (1.0, t)
    }
}

/// Closed-form damped oscillation of ⟨X⟩, ⟨P⟩.
pub fn first_moments_analytic(t: f64, x0: f64, p0: f64, gamma: f64, r: f64) -> FirstMoments {
    let (cs, sn) = propagator_pair(gamma, r, t);
    let env = (-gamma * t).exp();
    // each component obeys the same second-order equation; only the
    // initial slopes differ
    let xdot0 = p0 - r * gamma * x0;
    let pdot0 = -x0 - (2.0 - r) * gamma * p0;
    FirstMoments {
        x: env * (x0 * cs + (xdot0 + gamma * x0) * sn),
        p: env * (p0 * cs + (pdot0 + gamma * p0) * sn),
    }
}

/// Default number of output intervals used by [`evolve_moments`].
pub const DEFAULT_SAMPLES: usize = 200;

pub fn evolve_moments(
    init_f: FirstMoments,
    init_s: GaussianState,
    c: &LinearLmeCoefficients,
    r: f64,
    t_max: f64,
    tol: f64,
) -> Result<MomentTrajectory, LinearError> {
    if !(t_max > 0.0) {
        return Err(LinearError::InvalidInput("t_max must be positive"));
    }
    evolve_moments_at(init_f, init_s, c, r, &integrate::uniform_times(t_max, DEFAULT_SAMPLES), tol)
}

/// As [`evolve_moments`] with explicit output times.
pub fn evolve_moments_at(
    init_f: FirstMoments,
    init_s: GaussianState,
    c: &LinearLmeCoefficients,
    r: f64,
    times: &[f64],
    tol: f64,
) -> Result<MomentTrajectory, LinearError> {
    if !(tol > 0.0) {
        return Err(LinearError::InvalidInput("tolerance must be positive"));
    }
    if !init_s.is_valid() {
        return Err(LinearError::InvalidInput("initial Gaussian state is not valid"));
    }
    let y0 = [init_f.x, init_f.p, init_s.dx2, init_s.dp2, init_s.c()];
    let sol = integrate::dopri5(|_, y| raw_rhs(y, c, r), 0.0, y0, times, &Options::with_tol(tol), |_, _| Control::Continue)?;
    Ok(MomentTrajectory {
        times: sol.times,
        first: sol.states.iter().map(|y| FirstMoments { x: y[0], p: y[1] }).collect(),
        second: sol.states.iter().map(|y| GaussianState::from_c(y[2], y[3], y[4])).collect(),
    })
}

/// Integrates in windows of 10/Γ until every second moment changes by less
/// than `rel_change` across a window, or `t_cap` is reached.
pub fn evolve_to_stationarity(
    init_s: GaussianState,
    c: &LinearLmeCoefficients,
    r: f64,
    tol: f64,
    rel_change: f64,
    t_cap: f64,
) -> Result<(f64, GaussianState, bool), LinearError> {
    if c.gamma <= 0.0 {
        return Err(LinearError::NonPositiveDamping(c.gamma));
    }
    let window = 10.0 / c.gamma;
    let mut t = 0.0;
    let mut s = init_s;
    while t < t_cap {
        let traj = evolve_moments_at(FirstMoments::default(), s, c, r, &[0.0, window], tol)?;
        let (_, _, next) = traj.last().expect("two samples requested");
        t += window;
        let change = [
            (next.dx2 - s.dx2) / next.dx2,
            (next.dp2 - s.dp2) / next.dp2,
            (next.c() - s.c()) / (next.dx2 * next.dp2).sqrt(),
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
        s = next;
        if change < rel_change {
            return Ok((t, s, true));
        }
    }
    Ok((t, s, false))
}

/// Stationary second moments at r = 0.
pub fn stationary_gaussian(c: &LinearLmeCoefficients) -> Result<GaussianState, LinearError> {
    if !(c.gamma > 0.0) {
        return Err(LinearError::NonPositiveDamping(c.gamma));
    }
    let g = c.gamma;
    let sx2 = (c.d_xx - 4.0 * g * c.d_xp + (4.0 * g * g + 1.0) * c.d_pp) / (4.0 * g);
    let sp2 = (c.d_xx + c.d_pp) / (4.0 * g);
    Ok(GaussianState::from_c(2.0 * sx2, 2.0 * sp2, c.d_pp))
}

/// Stationary state of the Born–Markov equation. The position variance may
/// come out negative at low temperature; such states are returned as they
/// are, with the violation flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmmeStationary {
    pub state: GaussianState,
    /// sign(δ_x²δ_p²)·sqrt|δ_x²δ_p²|.
    pub hup_product: f64,
    pub hup_violated: bool,
}

pub fn bmme_stationary(c: &LinearLmeCoefficients) -> Result<BmmeStationary, LinearError> {
    if !(c.gamma > 0.0) {
        return Err(LinearError::NonPositiveDamping(c.gamma));
    }
    let g = c.gamma;
    let dx2 = (c.d_xx - 4.0 * g * c.d_xp) / (2.0 * g);
    let dp2 = c.d_xx / (2.0 * g);
    let prod = dx2 * dp2;
    let hup_product = prod.signum() * prod.abs().sqrt();
    Ok(BmmeStationary {
        state: GaussianState { dx2, dp2, rho: 0.0 },
        hup_product,
        hup_violated: hup_product < 1.0,
    })
}

/// Compares an integrated trajectory with the kinetic-momentum form
/// d⟨X⟩/dt = ⟨P⟩ − rΓ⟨X⟩, ẍ + 2Γẋ + ω²x = 0, solved from the trajectory's
/// first sample. Returns the largest absolute residual in x and in ẋ.
pub fn kinetic_momentum_check(traj: &MomentTrajectory, c: &LinearLmeCoefficients, r: f64) -> f64 {
    let Some(&t0) = traj.times.first() else {
        return 0.0;
    };
    let g = c.gamma;
    let x0 = traj.first[0].x;
    let v0 = traj.first[0].p - r * g * x0;
    let w2 = 1.0 - r * (r - 2.0) * g * g;
    // roots of s² + 2Γs + ω² = 0
    let disc = g * g - w2;
    let mut worst: f64 = 0.0;
    for (i, &t) in traj.times.iter().enumerate() {
        let tau = t - t0;
        let (x, v) = if disc < 0.0 {
            let w = (-disc).sqrt();
            let (s, co) = (w * tau).sin_cos();
            let e = (-g * tau).exp();
            let b = (v0 + g * x0) / w;
            (e * (x0 * co + b * s), e * (v0 * co - (x0 * w + g * b) * s))
        } else if disc > 0.0 {
            let k = disc.sqrt();
            let (s1, s2) = (-g + k, -g - k);
            let a = (v0 - s2 * x0) / (s1 - s2);
            let b = x0 - a;
            (a * (s1 * tau).exp() + b * (s2 * tau).exp(), a * s1 * (s1 * tau).exp() + b * s2 * (s2 * tau).exp())
        } else {
            let e = (-g * tau).exp();
            let b = v0 + g * x0;
            (e * (x0 + b * tau), e * (b - g * (x0 + b * tau)))
        };
        let p_kin = traj.first[i].p - r * g * traj.first[i].x;
        worst = worst.max((traj.first[i].x - x).abs()).max((p_kin - v).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ModelParams;

    fn coeffs(g: f64, lam: f64, tau: f64) -> LinearLmeCoefficients {
        LinearLmeCoefficients::from_params(&ModelParams::new(g, lam, tau).unwrap()).unwrap()
    }

    const ZERO: LinearLmeCoefficients = LinearLmeCoefficients { gamma: 0.0, d_xx: 0.0, d_xp: 0.0, d_pp: 0.0 };

    #[test]
    fn free_oscillator_rotation() {
        let d = moment_ode_rhs(&FirstMoments { x: 1.0, p: 0.0 }, &GaussianState { dx2: 3.0, dp2: 1.0, rho: 0.0 }, &ZERO, 0.0);
        assert_eq!((d.x, d.p), (0.0, -1.0));
        assert_eq!((d.dx2, d.dp2), (0.0, 0.0));
        assert!(d.rho > 0.0);
    }

    #[test]
    fn free_oscillator_conserves_energy() {
        let s0 = GaussianState { dx2: 3.0, dp2: 0.5, rho: 0.2 };
        let traj = evolve_moments(FirstMoments { x: 1.0, p: 0.3 }, s0, &ZERO, 0.0, 40.0, 1e-10).unwrap();
        for s in &traj.second {
            assert!((s.dx2 + s.dp2 - 3.5).abs() < 1e-8);
        }
    }

    #[test]
    fn analytic_first_moments() {
        let f = first_moments_analytic(0.0, 0.7, -0.2, 0.4, 0.5);
        assert_eq!((f.x, f.p), (0.7, -0.2));
        let t = 3.3;
        let f = first_moments_analytic(t, 0.7, -0.2, 0.0, 0.0);
        assert!((f.x - (0.7 * t.cos() - 0.2 * t.sin())).abs() < 1e-15);
    }

    #[test]
    fn analytic_vs_integration_all_branches() {
        for &(g, r) in &[(0.4, 0.0), (0.4, 1.0), (0.3, 2.0), (1.5, 0.0), (1.0, 0.0), (0.9, 3.5)] {
            let c = LinearLmeCoefficients { gamma: g, d_xx: 1.0, d_xp: 0.0, d_pp: 1.0 / 1.0 * g * g };
            let traj = evolve_moments(FirstMoments { x: 1.0, p: 0.4 }, GaussianState::GROUND, &c, r, 5.0, 1e-12).unwrap();
            for (t, f) in traj.times.iter().zip(&traj.first) {
                let a = first_moments_analytic(*t, 1.0, 0.4, g, r);
                assert!((a.x - f.x).abs() < 1e-8 && (a.p - f.p).abs() < 1e-8, "g={g} r={r} t={t}");
            }
            assert!(kinetic_momentum_check(&traj, &c, r) < 1e-8);
        }
    }

    #[test]
    fn effective_frequency_values() {
        assert_eq!(effective_frequency(0.3, 0.0), 1.0);
        assert_eq!(effective_frequency(0.3, 2.0), 1.0);
        assert!((effective_frequency(0.3, 1.0) - (1.0f64 + 0.09).sqrt()).abs() < 1e-15);
        assert_eq!(beta_r(0.3, 1.0), 1.0);
    }

    #[test]
    fn stationary_is_fixed_point() {
        let c = coeffs(0.8, 10.0, 0.5);
        let s = stationary_gaussian(&c).unwrap();
        let d = moment_ode_rhs(&FirstMoments::default(), &s, &c, 0.0);
        assert!(d.max_abs() < 1e-13, "{d:?}");
        assert!((s.c() * 0.5 - c.d_pp / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cl_form_limit() {
        let c = LinearLmeCoefficients { gamma: 0.5, d_xx: 2.0, d_xp: 0.0, d_pp: 0.0 };
        let s = stationary_gaussian(&c).unwrap();
        assert_eq!(s, GaussianState { dx2: 2.0, dp2: 2.0, rho: 0.0 });
        assert!(stationary_gaussian(&ZERO).is_err());
    }

    #[test]
    fn long_time_integration_reaches_stationary() {
        let c = coeffs(0.8, 10.0, 0.5);
        let target = stationary_gaussian(&c).unwrap();
        let traj = evolve_moments(FirstMoments { x: 1.0, p: 0.0 }, GaussianState::GROUND, &c, 0.0, 50.0 / c.gamma, 1e-10).unwrap();
        let (_, f, s) = traj.last().unwrap();
        assert!(((s.dx2 - target.dx2) / target.dx2).abs() < 1e-6);
        assert!(((s.dp2 - target.dp2) / target.dp2).abs() < 1e-6);
        assert!(((s.rho - target.rho) / target.rho).abs() < 1e-6);
        assert!(f.x.abs() < 1e-6);

        let (_, s2, done) = evolve_to_stationarity(GaussianState::GROUND, &c, 0.0, 1e-11, 1e-10, 1e4).unwrap();
        assert!(done);
        assert!(((s2.dx2 - target.dx2) / target.dx2).abs() < 1e-8);
    }

    #[test]
    fn bmme_violation_is_flagged() {
        let c = coeffs(0.8, 10.0, 0.1);
        let b = bmme_stationary(&c).unwrap();
        assert_eq!(b.state.rho, 0.0);
        assert!(b.hup_violated);
        let c = coeffs(0.1, 10.0, 1000.0);
        let b = bmme_stationary(&c).unwrap();
        assert!(((b.state.dx2 - 2000.0) / 2000.0).abs() < 0.01);
        assert!(((b.state.dp2 - 2000.0) / 2000.0).abs() < 0.01);
        assert!(!b.hup_violated);
    }

    #[test]
    fn csv_header_and_rows() {
        let traj = evolve_moments(FirstMoments::default(), GaussianState::GROUND, &coeffs(0.5, 5.0, 1.0), 0.0, 1.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,mean_x,mean_p,dx2,dp2,rho\n"));
        assert_eq!(text.lines().count(), DEFAULT_SAMPLES + 2);
    }
}
