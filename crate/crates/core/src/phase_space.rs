//! Shape of the stationary Wigner Gaussian: principal variances, tilt,
//! eccentricity and the cooling parameter.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{thermal_factor, CoefficientError, LinearLmeCoefficients, ModelParams};
use crate::linear_dynamics::{bmme_stationary, stationary_gaussian, GaussianState, LinearError};

#[derive(Debug, Error)]
pub enum PhaseSpaceError {
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error(transparent)]
    Dynamics(#[from] LinearError),
    #[error("non-finite {quantity} at tau = {tau}")]
    NonFinite { quantity: &'static str, tau: f64 },
    #[error("empty or unsorted temperature grid")]
    BadGrid,
    #[error("state has no positive principal variances")]
    Unphysical,
}

/// Relative size below which the covariance is treated as isotropic.
pub const ISOTROPY_EPS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PrincipalAxes {
    pub dl2: f64,
    pub dL2: f64,
    /// Major-axis angle in (0, π]; `None` for an isotropic covariance.
    pub theta: Option<f64>,
}

pub fn principal_axes(s: &GaussianState) -> PrincipalAxes {
    let (a, d) = (s.dx2, s.dp2);
    let off = -s.rho * (a * d).sqrt();
    let trace = a + d;
    let gap = ((a - d).powi(2) + 4.0 * off * off).sqrt();
    let big = 0.5 * (trace + gap);
    // the determinant form avoids cancellation in the small root
    let det = a * d * (1.0 - s.rho * s.rho);
    let small = if big > 0.0 { det / big } else { 0.5 * (trace - gap) };
    let theta = if gap <= ISOTROPY_EPS * trace.abs() {
        None
    } else {
        let phi = 0.5 * (2.0 * off).atan2(a - d);
        Some(if phi <= 0.0 { phi + PI } else { phi })
    };
    PrincipalAxes { dl2: small, dL2: big, theta }
}

#[allow(non_snake_case)]
pub fn eccentricity(dl2: f64, dL2: f64) -> f64 {
    (1.0 - dl2 / dL2).max(0.0).sqrt()
}

/// δ_l δ_L / coth(1/(2τ)); at τ = 0 the thermal factor is 1.
#[allow(non_snake_case)]
pub fn cooling_parameter(dl2: f64, dL2: f64, tau: f64) -> f64 {
    (dl2 * dL2).sqrt() / thermal_factor(tau)
}

/// T → 0 then γ → 0 limit of δ_x δ_p.
pub fn zero_temperature_product(lam: f64) -> f64 {
    1.25 + (lam.ln() / PI).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PhaseSpaceDiagnostics {
    pub dl2: f64,
    pub dL2: f64,
    pub eta: f64,
    pub theta: Option<f64>,
    pub chi: f64,
    pub hup_product: f64,
    pub genuine_squeezing: bool,
    pub cooled: bool,
    /// χ was evaluated with τ = 0.
    pub zero_temperature: bool,
}

impl PhaseSpaceDiagnostics {
    pub fn theta_over_pi(&self) -> Option<f64> {
        self.theta.map(|t| t / PI)
    }

    /// δ_l δ_L.
    pub fn principal_product(&self) -> f64 {
        (self.dl2 * self.dL2).sqrt()
    }
}

pub fn diagnostics(s: &GaussianState, tau: f64) -> PhaseSpaceDiagnostics {
    let ax = principal_axes(s);
    let chi = cooling_parameter(ax.dl2, ax.dL2, tau);
    PhaseSpaceDiagnostics {
        dl2: ax.dl2,
        dL2: ax.dL2,
        eta: eccentricity(ax.dl2, ax.dL2),
        theta: ax.theta,
        chi,
        hup_product: s.hup_product(),
        genuine_squeezing: ax.dl2 < 1.0,
        cooled: chi < 1.0,
        zero_temperature: tau == 0.0,
    }
}

/// Coefficients → stationary state → diagnostics.
pub fn stationary_diagnostics(p: &ModelParams) -> Result<(GaussianState, PhaseSpaceDiagnostics), PhaseSpaceError> {
    let c = LinearLmeCoefficients::from_params(p)?;
    let s = stationary_gaussian(&c)?;
    Ok((s, diagnostics(&s, p.tau)))
}

/// Cooling parameter of the Born–Markov stationary state. Its δ_x = δ_p
/// boundary does not depend on g. `None` when the state is unphysical.
pub fn bmme_cooling_parameter(p: &ModelParams) -> Result<Option<f64>, PhaseSpaceError> {
    let c = LinearLmeCoefficients::from_params(p)?;
    let b = bmme_stationary(&c)?;
    if !(b.state.dx2 > 0.0) {
        return Ok(None);
    }
    Ok(Some(b.hup_product / thermal_factor(p.tau)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinQuantity {
    Dl2,
    Chi,
}

impl MinQuantity {
    fn eval(self, g: f64, lam: f64, tau: f64) -> Result<f64, PhaseSpaceError> {
        let (_, d) = stationary_diagnostics(&ModelParams::new(g, lam, tau)?)?;
        let v = match self {
            MinQuantity::Dl2 => d.dl2,
            MinQuantity::Chi => d.chi,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PhaseSpaceError::NonFinite {
                quantity: match self {
                    MinQuantity::Dl2 => "dl2",
                    MinQuantity::Chi => "chi",
                },
                tau,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureMinimum {
    pub value: f64,
    pub tau: f64,
}

/// Minimum over τ of δ_l² or χ: grid scan, then golden-section search in
/// ln τ between the neighbours of the grid argmin, to 1e-4 relative in τ.
pub fn min_over_temperature(quantity: MinQuantity, g: f64, lam: f64, tau_grid: &[f64]) -> Result<TemperatureMinimum, PhaseSpaceError> {
    if tau_grid.is_empty() || tau_grid.windows(2).any(|w| w[1] <= w[0]) || tau_grid[0] <= 0.0 {
        return Err(PhaseSpaceError::BadGrid);
    }
    let values = tau_grid
        .iter()
        .map(|&t| quantity.eval(g, lam, t))
        .collect::<Result<Vec<_>, _>>()?;
    let (i_min, &v_min) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    if tau_grid.len() < 3 {
        return Ok(TemperatureMinimum { value: v_min, tau: tau_grid[i_min] });
    }
    let lo = tau_grid[i_min.saturating_sub(1)].ln();
    let hi = tau_grid[(i_min + 1).min(tau_grid.len() - 1)].ln();
    let f = |u: f64| quantity.eval(g, lam, u.exp());
    let (u, v) = golden_section(f, lo, hi, 1e-4)?;
    Ok(if v < v_min {
        TemperatureMinimum { value: v, tau: u.exp() }
    } else {
        TemperatureMinimum { value: v_min, tau: tau_grid[i_min] }
    })
}

fn golden_section<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64), PhaseSpaceError>
where
    F: Fn(f64) -> Result<f64, PhaseSpaceError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    // |Δ ln τ| < tol is a relative tolerance on τ
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// Column names of a diagnostics CSV row.
pub const CSV_HEADER: &str =
    "tau,lam,g,dx2,dp2,rho,dl2,dL2,eta,theta_over_pi,chi,hup_product,genuine_squeezing,cooled";

pub fn csv_row(p: &ModelParams, s: &GaussianState, d: &PhaseSpaceDiagnostics) -> String {
    let theta = d.theta_over_pi().map_or_else(|| "iso".to_string(), |t| t.to_string());
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.tau, p.lam, p.g, s.dx2, s.dp2, s.rho, d.dl2, d.dL2, d.eta, theta, d.chi, d.hup_product, d.genuine_squeezing, d.cooled
    )
}
