//! Bisection for the damping ratio above which the quadratic closure stops
//! relaxing to a stationary state.

use serde::{Deserialize, Serialize};

use super::{CellError, CoefficientSource, SweepError, Tolerances};
use crate::quadratic_dynamics::{evolve_closure, ClosureError, ConvergenceStatus, QuadraticClosureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Target width of the bracketing interval.
    pub width: f64,
    pub tolerances: Tolerances,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { width: 0.01, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ThresholdOutcome {
    /// The classifier changes between `g_lo` and `g_hi`; `converged_below`
    /// tells which side relaxes.
    Interval { g_lo: f64, g_hi: f64, converged_below: bool },
    /// Same classification at both ends of the range: no threshold.
    Uniform { converged: bool },
}

impl ThresholdOutcome {
    pub fn midpoint(&self) -> Option<f64> {
        match self {
            ThresholdOutcome::Interval { g_lo, g_hi, .. } => Some(0.5 * (g_lo + g_hi)),
            ThresholdOutcome::Uniform { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub lam: f64,
    pub tau: f64,
    pub g_range: (f64, f64),
    pub outcome: ThresholdOutcome,
    /// Every classifier call as (g, status).
    pub evaluations: Vec<(f64, String)>,
}

/// Runs the closure from the ground state at damping `g` and reports
/// whether it converged. A collapse of the covariance counts as not
/// converged.
pub fn classify_g(source: &CoefficientSource, g: f64, lam: f64, tau: f64, tol: &Tolerances) -> Result<(bool, &'static str), CellError> {
    let q = source.lme_at(g, lam, tau)?;
    match evolve_closure(QuadraticClosureState::GROUND, &q, tol.closure_t_max(g), tol.ode) {
        Ok((_, r)) => Ok((r.status == ConvergenceStatus::Converged, r.status.as_str())),
        Err(e @ ClosureError::StateCollapse { .. }) => Ok((false, e.reason_code())),
        Err(e) => Err(e.into()),
    }
}

pub fn threshold_scan(
    source: &CoefficientSource,
    lam: f64,
    tau: f64,
    g_range: (f64, f64),
    opts: &ThresholdOptions,
) -> Result<ThresholdReport, SweepError> {
    let (mut lo, mut hi) = g_range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(SweepError::config("g", "threshold range needs 0 < lo < hi"));
    }
    if !(opts.width > 0.0) {
        return Err(SweepError::config("width", "must be positive"));
    }
    let mut evaluations = Vec::new();
    let mut eval = |g: f64| -> Result<bool, SweepError> {
        let (ok, status) = classify_g(source, g, lam, tau, &opts.tolerances)
            .map_err(|e| SweepError::Numerical(format!("g = {g}: {} ({})", e.message, e.reason)))?;
        evaluations.push((g, status.to_string()));
        Ok(ok)
    };
    let c_lo = eval(lo)?;
    let c_hi = eval(hi)?;
    let outcome = if c_lo == c_hi {
        ThresholdOutcome::Uniform { converged: c_lo }
    } else {
        while hi - lo > opts.width {
            let mid = 0.5 * (lo + hi);
            if eval(mid)? == c_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ThresholdOutcome::Interval { g_lo: lo, g_hi: hi, converged_below: c_lo }
    };
    Ok(ThresholdReport { lam, tau, g_range, outcome, evaluations })
}
