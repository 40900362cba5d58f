use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::SweepError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Linear,
    Quadratic,
    Oracle,
    CheckLindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Theta,
    Eta,
    Chi,
    Dl2,
    Hup,
    MinDl2,
    MinChi,
    Convergence,
}

impl Quantity {
    pub fn is_minimum(self) -> bool {
        matches!(self, Quantity::MinDl2 | Quantity::MinChi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    #[default]
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl AxisRange {
    pub fn log(lo: f64, hi: f64, n: usize) -> Self {
        AxisRange { lo, hi, n, scale: Scale::Log }
    }

    pub fn single(v: f64) -> Self {
        AxisRange { lo: v, hi: v, n: 1, scale: Scale::Log }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|i| {
                let f = i as f64 / last;
                if i == self.n - 1 {
                    self.hi
                } else {
                    match self.scale {
                        Scale::Linear => self.lo + f * (self.hi - self.lo),
                        Scale::Log => self.lo * (self.hi / self.lo).powf(f),
                    }
                }
            })
            .collect()
    }

    pub(crate) fn validate(&self, field: &str) -> Result<(), SweepError> {
        let bad = |reason: &str| Err(SweepError::config(field, reason));
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return bad("bounds must be finite");
        }
        if !(self.lo > 0.0) {
            return bad("lo must be positive");
        }
        if self.hi < self.lo {
            return bad("hi must not be below lo");
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        Ok(())
    }
}

/// A single damping ratio or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GValues {
    One(f64),
    Many(Vec<f64>),
}

impl GValues {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GValues::One(g) => vec![*g],
            GValues::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative/absolute tolerance of the adaptive integrators.
    pub ode: f64,
    /// Trailing-window variation below which a closure run counts as converged.
    pub convergence: f64,
    /// Closure integration time; by default max(400, 60/g).
    pub closure_t_max: Option<f64>,
    /// Largest damping ratio at which a quadratic stationary state is seeded
    /// by direct integration before continuing in g.
    pub seed_g: f64,
    /// Relative jump that signals loss of the stationary branch.
    pub max_jump: f64,
    pub fock_t_max: f64,
    pub fock_dt: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode: 1e-10,
            convergence: 1e-6,
            closure_t_max: None,
            seed_g: 0.1,
            max_jump: crate::quadratic_dynamics::DEFAULT_MAX_JUMP,
            fock_t_max: 60.0,
            fock_dt: 0.01,
        }
    }
}

impl Tolerances {
    pub fn closure_t_max(&self, g: f64) -> f64 {
        self.closure_t_max.unwrap_or_else(|| (60.0 / g).max(400.0))
    }
}

fn default_fock_dim() -> usize {
    crate::fock_oracle::DEFAULT_LINEAR_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: Mode,
    pub quantity: Quantity,
    pub g: GValues,
    pub tau_range: AxisRange,
    pub lam_range: AxisRange,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Quadratic coefficient file; the non-physical surrogate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PathBuf>,
    #[serde(default = "default_fock_dim")]
    pub fock_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

impl SweepConfig {
    pub fn new(mode: Mode, quantity: Quantity, g: f64, tau_range: AxisRange, lam_range: AxisRange) -> Self {
        SweepConfig {
            mode,
            quantity,
            g: GValues::One(g),
            tau_range,
            lam_range,
            r: 0.0,
            tolerances: Tolerances::default(),
            coefficients: None,
            fock_dim: default_fock_dim(),
            output: None,
            preset: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        let cfg: SweepConfig = serde_json::from_str(text).map_err(|e| SweepError::config("<root>", &e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let gs = self.g.values();
        if gs.is_empty() {
            return Err(SweepError::config("g", "at least one value is required"));
        }
        for (i, g) in gs.iter().enumerate() {
            if !(g.is_finite() && *g > 0.0) {
                return Err(SweepError::config(&format!("g[{i}]"), "must be positive and finite"));
            }
        }
        self.tau_range.validate("tau_range")?;
        self.lam_range.validate("lam_range")?;
        if !self.r.is_finite() {
            return Err(SweepError::config("r", "must be finite"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.ode", t.ode),
            ("tolerances.convergence", t.convergence),
            ("tolerances.seed_g", t.seed_g),
            ("tolerances.max_jump", t.max_jump),
            ("tolerances.fock_t_max", t.fock_t_max),
            ("tolerances.fock_dt", t.fock_dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SweepError::config(name, "must be positive and finite"));
            }
        }
        if let Some(tm) = t.closure_t_max {
            if !(tm.is_finite() && tm > 0.0) {
                return Err(SweepError::config("tolerances.closure_t_max", "must be positive and finite"));
            }
        }
        if self.fock_dim < crate::fock_oracle::MIN_DIM {
            return Err(SweepError::config("fock_dim", "must be at least 2"));
        }
        let ok = match self.mode {
            Mode::Linear => self.quantity != Quantity::Convergence,
            Mode::Quadratic => !self.quantity.is_minimum(),
            Mode::Oracle | Mode::CheckLindblad => true,
        };
        if !ok {
            return Err(SweepError::config("quantity", "not available in this mode"));
        }
        if self.r != 0.0 && (self.mode != Mode::Linear || self.quantity.is_minimum()) {
            return Err(SweepError::config("r", "a counter-term is only supported for linear stationary sweeps"));
        }
        if self.quantity.is_minimum() && self.tau_range.n < 3 {
            return Err(SweepError::config("tau_range.n", "temperature minimisation needs at least 3 points"));
        }
        Ok(())
    }
}

/// Resolution used by the bundled presets.
pub const PRESET_RESOLUTION: usize = 100;

/// Names of the bundled presets.
pub const PRESET_NAMES: [&str; 10] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "quadratic-theta", "fig8", "fig9"];

/// Bundled sweep configurations. Grids are 100×100, log-spaced in τ and
/// Λ; the minimum-over-temperature presets scan 100 temperatures.
pub fn preset(name: &str) -> Option<SweepConfig> {
    let n = PRESET_RESOLUTION;
    let tau = AxisRange::log(0.01, 10.0, n);
    let lam = AxisRange::log(1.0, 100.0, n);
    let gs = || GValues::Many(vec![0.2, 0.4, 0.5, 0.6, 0.8, 1.0]);
    let mut cfg = match name {
        "fig1" => SweepConfig::new(Mode::Linear, Quantity::Theta, 0.8, tau, lam),
        "fig2" => SweepConfig::new(Mode::Linear, Quantity::Eta, 0.8, tau, lam),
        "fig3" => SweepConfig { g: gs(), ..SweepConfig::new(Mode::Linear, Quantity::MinDl2, 0.8, tau, AxisRange::log(2.0, 100.0, n)) },
        "fig4" => SweepConfig::new(Mode::Linear, Quantity::Chi, 0.8, tau, lam),
        "fig5" => SweepConfig { g: gs(), ..SweepConfig::new(Mode::Linear, Quantity::MinChi, 0.8, tau, AxisRange::log(2.0, 100.0, n)) },
        "fig6" => SweepConfig::new(Mode::Quadratic, Quantity::Eta, 0.1, tau, lam),
        "fig7" => SweepConfig::new(Mode::Quadratic, Quantity::Chi, 0.1, tau, lam),
        "quadratic-theta" => SweepConfig::new(Mode::Quadratic, Quantity::Theta, 0.1, tau, lam),
        "fig8" => SweepConfig {
            g: GValues::Many((1..=40).map(|k| k as f64 / 10.0).collect()),
            ..SweepConfig::new(Mode::Quadratic, Quantity::Convergence, 0.1, AxisRange::single(4.0), AxisRange::single(16.0))
        },
        "fig9" => SweepConfig::new(Mode::Quadratic, Quantity::Hup, 0.1, tau, lam),
        _ => return None,
    };
    cfg.preset = Some(name.to_string());
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values() {
        let a = AxisRange::log(1.0, 100.0, 3);
        let v = a.values();
        assert_eq!(v.len(), 3);
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert_eq!(v[2], 100.0);
        let l = AxisRange { lo: 0.0, hi: 1.0, n: 5, scale: Scale::Linear };
        assert_eq!(l.values()[2], 0.5);
        assert_eq!(AxisRange::single(3.0).values(), vec![3.0]);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut cfg = preset("fig1").unwrap();
        cfg.tau_range.lo = -1.0;
        match cfg.validate() {
            Err(SweepError::Config { field, .. }) => assert_eq!(field, "tau_range"),
            other => panic!("{other:?}"),
        }
        let mut cfg = preset("fig3").unwrap();
        cfg.g = GValues::Many(vec![0.2, f64::NAN]);
        match cfg.validate() {
            Err(SweepError::Config { field, .. }) => assert_eq!(field, "g[1]"),
            other => panic!("{other:?}"),
        }
        let cfg = SweepConfig::new(Mode::Linear, Quantity::Convergence, 0.1, AxisRange::single(1.0), AxisRange::single(1.0));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let text = serde_json::to_string(&cfg).unwrap();
            assert_eq!(SweepConfig::from_json(&text).unwrap(), cfg);
        }
        assert!(preset("fig10").is_none());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"mode":"linear","quantity":"eta","g":0.8,"tau_range":{"lo":0.1,"hi":1,"n":2},"lam_range":{"lo":1,"hi":2,"n":2},"bogus":1}"#;
        assert!(SweepConfig::from_json(text).is_err());
        let text = r#"{"mode":"linear","quantity":"eta","g":[0.8,0.5],"tau_range":{"lo":0.1,"hi":1,"n":2},"lam_range":{"lo":1,"hi":2,"n":2}}"#;
        let cfg = SweepConfig::from_json(text).unwrap();
        assert_eq!(cfg.g.values(), vec![0.8, 0.5]);
        assert_eq!(cfg.tau_range.scale, Scale::Log);
    }
}
