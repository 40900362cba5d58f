//! Parameter-grid orchestration and machine-readable output.
//!
//! A sweep is a pure map over grid cells keyed by (g, τ, Λ). Cells are
//! evaluated in parallel and collected in grid order, so the result does not
//! depend on scheduling. A cell is either a record or an error marker with a
//! reason code.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coefficients::{CoefficientError, LinearLmeCoefficients, ModelParams};
use crate::fock_oracle::{run_linear_oracle, OracleConfig, OracleReport, KOSSAKOWSKI_TOL};
use crate::linear_dynamics::{evolve_to_stationarity, stationary_gaussian, GaussianState};
use crate::phase_space::{diagnostics, min_over_temperature, MinQuantity, PhaseSpaceDiagnostics, TemperatureMinimum};
use crate::quadratic_dynamics::{
    cl_branch_continuation, evolve_closure, stationary_newton, ClosureError, ConvergenceReport, ConvergenceStatus, QuadraticClosureState,
    StationaryPoint,
};

mod boundary;
mod config;
mod emit;
mod source;
mod threshold;

pub use boundary::{cooling_boundary, hausdorff_distance, marching_squares, BoundaryResult, Polyline};
pub use config::{preset, AxisRange, GValues, Mode, Quantity, Scale, SweepConfig, Tolerances, PRESET_NAMES, PRESET_RESOLUTION};
pub use emit::{emit, parse_csv, summary, to_csv, to_json, EmitFormat, EmitPaths};
pub use source::{CoefficientSource, CoefficientTable, TableEntry};
pub use threshold::{classify_g, threshold_scan, ThresholdOptions, ThresholdOutcome, ThresholdReport};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
}

impl SweepError {
    pub(crate) fn config(field: &str, reason: &str) -> Self {
        SweepError::Config { field: field.to_string(), reason: reason.to_string() }
    }
}

/// Explicit failure marker for one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    pub reason: String,
    pub message: String,
}

impl CellError {
    pub const BRANCH_LOSS: &'static str = "branch-loss";
    pub const STATE_COLLAPSE: &'static str = "state-collapse";
    pub const NEWTON_FAILURE: &'static str = "newton-failure";
    pub const TRUNCATION_UNTRUSTED: &'static str = "truncation-untrusted";
    pub const COEFFICIENTS_MISSING: &'static str = "coefficients-missing";
    pub const NOT_STATIONARY: &'static str = "not-stationary";
    pub const NON_FINITE: &'static str = "non-finite";
    pub const INVALID_INPUT: &'static str = "invalid-input";
    pub const NUMERICAL: &'static str = "numerical-failure";

    pub fn new(reason: &str, message: impl Into<String>) -> Self {
        CellError { reason: reason.to_string(), message: message.into() }
    }
}

impl From<ClosureError> for CellError {
    fn from(e: ClosureError) -> Self {
        CellError::new(e.reason_code(), e.to_string())
    }
}

/// Stationary state plus diagnostics, in the column layout of the CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DiagnosticsRecord {
    pub dx2: f64,
    pub dp2: f64,
    pub rho: f64,
    pub dl2: f64,
    pub dL2: f64,
    pub eta: f64,
    /// θ/π; `None` for an isotropic state.
    pub theta_over_pi: Option<f64>,
    pub chi: f64,
    pub hup_product: f64,
    pub genuine_squeezing: bool,
    pub cooled: bool,
}

impl DiagnosticsRecord {
    pub fn new(s: &GaussianState, d: &PhaseSpaceDiagnostics) -> Self {
        DiagnosticsRecord {
            dx2: s.dx2,
            dp2: s.dp2,
            rho: s.rho,
            dl2: d.dl2,
            dL2: d.dL2,
            eta: d.eta,
            theta_over_pi: d.theta_over_pi(),
            chi: d.chi,
            hup_product: d.hup_product,
            genuine_squeezing: d.genuine_squeezing,
            cooled: d.cooled,
        }
    }

    pub fn state(&self) -> GaussianState {
        GaussianState { dx2: self.dx2, dp2: self.dp2, rho: self.rho }
    }

    fn all_finite(&self) -> bool {
        [self.dx2, self.dp2, self.rho, self.dl2, self.dL2, self.eta, self.chi, self.hup_product]
            .iter()
            .all(|v| v.is_finite())
            && self.theta_over_pi.is_none_or(f64::is_finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladCheck {
    pub kossakowski_min_eigenvalue: f64,
    pub identity_residual: f64,
    pub psd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellRecord {
    Diagnostics(DiagnosticsRecord),
    Convergence(ConvergenceReport),
    Minimum(TemperatureMinimum),
    Oracle(Box<OracleReport>),
    Lindblad(LindbladCheck),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Record(CellRecord),
    Error(CellError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub g: f64,
    /// Absent for minimum-over-temperature cells.
    pub tau: Option<f64>,
    pub lam: f64,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn is_error(&self) -> bool {
        matches!(self.outcome, CellOutcome::Error(_))
    }

    pub fn record(&self) -> Option<&CellRecord> {
        match &self.outcome {
            CellOutcome::Record(r) => Some(r),
            CellOutcome::Error(_) => None,
        }
    }

    /// The scalar selected by `quantity`, if this cell carries one.
    pub fn value(&self, quantity: Quantity) -> Option<f64> {
        match (self.record()?, quantity) {
            (CellRecord::Diagnostics(d), Quantity::Theta) => d.theta_over_pi,
            (CellRecord::Diagnostics(d), Quantity::Eta) => Some(d.eta),
            (CellRecord::Diagnostics(d), Quantity::Chi) => Some(d.chi),
            (CellRecord::Diagnostics(d), Quantity::Dl2) => Some(d.dl2),
            (CellRecord::Diagnostics(d), Quantity::Hup) => Some(d.hup_product),
            (CellRecord::Minimum(m), Quantity::MinDl2 | Quantity::MinChi) => Some(m.value),
            (CellRecord::Convergence(c), Quantity::Convergence) => Some(c.window_variation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axes {
    pub g: Vec<f64>,
    /// Empty for minimum-over-temperature sweeps.
    pub tau: Vec<f64>,
    pub lam: Vec<f64>,
}

impl Axes {
    pub fn cell_count(&self) -> usize {
        self.g.len() * self.lam.len() * self.tau.len().max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub cell_count: usize,
    pub error_count: usize,
    pub coefficient_source: Option<String>,
    pub resolution_note: String,
}

/// Cells are ordered by g, then Λ, then τ (fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub config: SweepConfig,
    pub axes: Axes,
    pub cells: Vec<Cell>,
    pub metadata: Metadata,
}

impl GridResult {
    pub fn error_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_error()).count()
    }

    /// Values of `quantity` at fixed g as a [τ][Λ] field; `None` where a cell
    /// failed.
    pub fn field(&self, g_index: usize, quantity: Quantity) -> Vec<Vec<Option<f64>>> {
        let (nt, nl) = (self.axes.tau.len(), self.axes.lam.len());
        let base = g_index * nt * nl;
        (0..nt)
            .map(|i| (0..nl).map(|j| self.cells[base + j * nt + i].value(quantity)).collect())
            .collect()
    }
}

/// SHA-256 of the canonical JSON form of `cfg`.
pub fn config_hash(cfg: &SweepConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn resolution_note(cfg: &SweepConfig) -> String {
    let n = PRESET_RESOLUTION;
    format!(
        "grid {}x{} (tau x lam); presets use {n}x{n} log-spaced grids",
        cfg.tau_range.n, cfg.lam_range.n
    )
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<GridResult, SweepError> {
    cfg.validate()?;
    let source = match (&cfg.coefficients, cfg.mode) {
        (Some(path), Mode::Quadratic) => CoefficientSource::from_path(path)?,
        _ => CoefficientSource::Surrogate,
    };
    run_sweep_with(cfg, &source)
}

/// [`run_sweep`] with an explicit coefficient source for quadratic mode.
pub fn run_sweep_with(cfg: &SweepConfig, source: &CoefficientSource) -> Result<GridResult, SweepError> {
    cfg.validate()?;
    let start = Instant::now();
    let axes = Axes {
        g: cfg.g.values(),
        tau: if cfg.quantity.is_minimum() { Vec::new() } else { cfg.tau_range.values() },
        lam: cfg.lam_range.values(),
    };
    let tau_grid = cfg.tau_range.values();
    let mut coords = Vec::with_capacity(axes.cell_count());
    for &g in &axes.g {
        for &lam in &axes.lam {
            if axes.tau.is_empty() {
                coords.push((g, None, lam));
            } else {
                coords.extend(axes.tau.iter().map(|&t| (g, Some(t), lam)));
            }
        }
    }
    let cells: Vec<Cell> = coords
        .into_par_iter()
        .map(|(g, tau, lam)| {
            let outcome = match evaluate(cfg, source, g, tau, lam, &tau_grid) {
                Ok(r) => CellOutcome::Record(r),
                Err(e) => CellOutcome::Error(e),
            };
            Cell { g, tau, lam, outcome }
        })
        .collect();
    let error_count = cells.iter().filter(|c| c.is_error()).count();
    let metadata = Metadata {
        config_hash: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        cell_count: cells.len(),
        error_count,
        coefficient_source: (cfg.mode == Mode::Quadratic).then(|| source.label()),
        resolution_note: resolution_note(cfg),
    };
    Ok(GridResult { config: cfg.clone(), axes, cells, metadata })
}

fn params(g: f64, lam: f64, tau: f64, r: f64) -> Result<ModelParams, CellError> {
    ModelParams::with_counter_term(g, lam, tau, r).map_err(|e| CellError::new(CellError::INVALID_INPUT, e.to_string()))
}

fn linear_coefficients(p: &ModelParams) -> Result<LinearLmeCoefficients, CellError> {
    LinearLmeCoefficients::from_params(p).map_err(|e| CellError::new(CellError::NUMERICAL, e.to_string()))
}

fn diagnostics_record(s: &GaussianState, tau: f64) -> Result<CellRecord, CellError> {
    let rec = DiagnosticsRecord::new(s, &diagnostics(s, tau));
    if rec.all_finite() {
        Ok(CellRecord::Diagnostics(rec))
    } else {
        Err(CellError::new(CellError::NON_FINITE, format!("non-finite diagnostics for state {s:?}")))
    }
}

fn evaluate(cfg: &SweepConfig, source: &CoefficientSource, g: f64, tau: Option<f64>, lam: f64, tau_grid: &[f64]) -> Result<CellRecord, CellError> {
    let tol = &cfg.tolerances;
    let Some(tau) = tau else {
        let q = match cfg.quantity {
            Quantity::MinChi => MinQuantity::Chi,
            _ => MinQuantity::Dl2,
        };
        return min_over_temperature(q, g, lam, tau_grid)
            .map(CellRecord::Minimum)
            .map_err(|e| CellError::new(CellError::NUMERICAL, e.to_string()));
    };
    match cfg.mode {
        Mode::Linear => {
            let p = params(g, lam, tau, cfg.r)?;
            let c = linear_coefficients(&p)?;
            let s = linear_stationary(&c, cfg.r, tol)?;
            diagnostics_record(&s, tau)
        }
        Mode::Quadratic if cfg.quantity == Quantity::Convergence => {
            let q = source.lme_at(g, lam, tau)?;
            let (_, report) = evolve_closure(QuadraticClosureState::GROUND, &q, tol.closure_t_max(g), tol.ode)?;
            Ok(CellRecord::Convergence(report))
        }
        Mode::Quadratic => {
            let root = quadratic_stationary(source, g, lam, tau, tol)?;
            diagnostics_record(&root.state.to_gaussian(), tau)
        }
        Mode::Oracle => {
            let p = params(g, lam, tau, 0.0)?;
            let mut oc = OracleConfig::new(p, cfg.fock_dim, tol.fock_t_max);
            oc.dt = tol.fock_dt;
            let report = run_linear_oracle(&oc).map_err(|e| CellError::new(CellError::NUMERICAL, e.to_string()))?;
            if !report.pass_flags.truncation_trusted {
                return Err(CellError::new(
                    CellError::TRUNCATION_UNTRUSTED,
                    format!("top-level population {:e} at dim {}", report.trunc_pop, report.dim),
                ));
            }
            Ok(CellRecord::Oracle(Box::new(report)))
        }
        Mode::CheckLindblad => {
            let c = linear_coefficients(&params(g, lam, tau, cfg.r)?)?;
            let k = c.kossakowski_min_eigenvalue();
            Ok(CellRecord::Lindblad(LindbladCheck {
                kossakowski_min_eigenvalue: k,
                identity_residual: c.identity_residual(),
                psd: k >= KOSSAKOWSKI_TOL,
            }))
        }
    }
}

/// Closed form at r = 0; otherwise the moment equations are integrated until
/// the second moments stop changing.
pub fn linear_stationary(c: &LinearLmeCoefficients, r: f64, tol: &Tolerances) -> Result<GaussianState, CellError> {
    if r == 0.0 {
        return stationary_gaussian(c).map_err(|e| CellError::new(CellError::NUMERICAL, e.to_string()));
    }
    let cap = 2000.0 / c.gamma;
    let (t, s, done) = evolve_to_stationarity(GaussianState::GROUND, c, r, tol.ode, tol.convergence, cap)
        .map_err(|e| CellError::new(CellError::NUMERICAL, e.to_string()))?;
    if done {
        Ok(s)
    } else {
        Err(CellError::new(CellError::NOT_STATIONARY, format!("moments still drifting at t = {t}")))
    }
}

/// Continuation ratio between successive damping values.
const CONTINUATION_RATIO: f64 = 1.05;

/// CL-branch stationary closure state. The branch is seeded at
/// g₀ = min(g, seed_g) by integrating from the ground state and polishing
/// with Newton, then followed in g to the target.
pub fn quadratic_stationary(source: &CoefficientSource, g: f64, lam: f64, tau: f64, tol: &Tolerances) -> Result<StationaryPoint, CellError> {
    let g0 = g.min(tol.seed_g);
    let q0 = source.lme_at(g0, lam, tau)?;
    let (traj, report) = evolve_closure(QuadraticClosureState::GROUND, &q0, tol.closure_t_max(g0), tol.ode)?;
    let last = match (report.status, traj.states.last()) {
        (ConvergenceStatus::Diverged, _) | (_, None) => {
            return Err(CellError::new(CellError::BRANCH_LOSS, format!("closure at seed g = {g0} diverges")));
        }
        (_, Some(s)) => *s,
    };
    // slowly relaxing runs are finished by Newton, provided the root is an
    // attractor close to where the trajectory ended
    let seed = stationary_newton(&q0, last)?;
    let jump = seed.state.relative_distance(&last);
    if !seed.is_stable() || jump > tol.max_jump {
        return Err(CellError::new(
            CellError::BRANCH_LOSS,
            format!("seed at g = {g0}: closure is {}, nearest root is {} (jump {jump:.3})", report.status.as_str(), if seed.is_stable() { "stable" } else { "unstable" }),
        ));
    }
    if g <= g0 {
        return Ok(seed);
    }
    let steps = ((g / g0).ln() / CONTINUATION_RATIO.ln()).ceil().max(1.0) as usize;
    let path = (0..=steps)
        .map(|k| source.lme_at(g0 * (g / g0).powf(k as f64 / steps as f64), lam, tau))
        .collect::<Result<Vec<_>, _>>()?;
    let roots = cl_branch_continuation(&path, seed.state, tol.max_jump)?;
    let last = *roots.last().expect("non-empty path");
    if !last.state.is_valid() {
        return Err(CellError::new(CellError::STATE_COLLAPSE, format!("continued state {:?} is not a valid covariance", last.state)));
    }
    Ok(last)
}
