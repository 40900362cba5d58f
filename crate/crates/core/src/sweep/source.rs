use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellError, SweepError};
use crate::coefficients::{
    quadratic_lme_coefficients, ModelParams, QuadraticBaseCoefficients, QuadraticCoefficientFile, QuadraticLmeCoefficients,
};

/// One row of a coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub lam: f64,
    pub tau: f64,
    #[serde(flatten)]
    pub coefficients: QuadraticBaseCoefficients,
}

/// Coefficient sets keyed by (Λ, τ), all produced at damping `g_ref`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub g_ref: f64,
    pub entries: Vec<TableEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CoefficientTable {
    const MATCH_TOL: f64 = 1e-9;

    pub fn lookup(&self, lam: f64, tau: f64) -> Option<&QuadraticBaseCoefficients> {
        let close = |a: f64, b: f64| (a - b).abs() <= Self::MATCH_TOL * a.abs().max(b.abs());
        self.entries.iter().find(|e| close(e.lam, lam) && close(e.tau, tau)).map(|e| &e.coefficients)
    }
}

/// Where the quadratic-coupling coefficients come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    /// [`QuadraticBaseCoefficients::linear_analogue_surrogate`]; not physical.
    Surrogate,
    /// One coefficient set for every (Λ, τ), rescaled in g.
    File(QuadraticCoefficientFile),
    Table(CoefficientTable),
    /// Fixed dissipator coefficients, used unchanged at every g.
    Lme(QuadraticLmeCoefficients),
}

impl CoefficientSource {
    /// Reads a coefficient file; a top-level `entries` array selects the
    /// table form.
    pub fn from_path(path: &Path) -> Result<Self, SweepError> {
        let text = fs::read_to_string(path).map_err(|source| SweepError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|e| match e {
            SweepError::Config { reason, .. } => SweepError::config("coefficients", &format!("{}: {reason}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SweepError::config("coefficients", &e.to_string()))?;
        if value.get("entries").is_some() {
            let table: CoefficientTable = serde_json::from_value(value).map_err(|e| SweepError::config("coefficients", &e.to_string()))?;
            if !(table.g_ref.is_finite() && table.g_ref > 0.0) {
                return Err(SweepError::config("coefficients.g_ref", "must be positive"));
            }
            for (i, e) in table.entries.iter().enumerate() {
                e.coefficients
                    .validate()
                    .map_err(|err| SweepError::config(&format!("coefficients.entries[{i}]"), &err.to_string()))?;
            }
            Ok(CoefficientSource::Table(table))
        } else {
            QuadraticCoefficientFile::from_json(text)
                .map(CoefficientSource::File)
                .map_err(|e| SweepError::config("coefficients", &e.to_string()))
        }
    }

    pub fn label(&self) -> String {
        match self {
            CoefficientSource::Surrogate => "surrogate (non-physical linear analogue)".into(),
            CoefficientSource::File(f) => match &f.note {
                Some(n) => format!("file: {n}"),
                None => "file".into(),
            },
            CoefficientSource::Table(t) => format!("table with {} entries", t.entries.len()),
            CoefficientSource::Lme(_) => "fixed dissipator coefficients".into(),
        }
    }

    /// Dissipator coefficients at one grid point.
    pub fn lme_at(&self, g: f64, lam: f64, tau: f64) -> Result<QuadraticLmeCoefficients, CellError> {
        let base = match self {
            CoefficientSource::Lme(q) => return Ok(*q),
            CoefficientSource::Surrogate => {
                let p = ModelParams::new(g, lam, tau).map_err(|e| CellError::new(CellError::INVALID_INPUT, e.to_string()))?;
                QuadraticBaseCoefficients::linear_analogue_surrogate(&p)
                    .map_err(|e| CellError::new(CellError::INVALID_INPUT, e.to_string()))?
            }
            CoefficientSource::File(f) => f.at(g),
            CoefficientSource::Table(t) => t
                .lookup(lam, tau)
                .ok_or_else(|| CellError::new(CellError::COEFFICIENTS_MISSING, format!("no entry for lam = {lam}, tau = {tau}")))?
                .scaled(g / t.g_ref),
        };
        quadratic_lme_coefficients(&base).map_err(|e| CellError::new(CellError::INVALID_INPUT, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookup_and_missing_entry() {
        let text = r#"{"g_ref":0.1,"entries":[{"lam":16,"tau":4,"d_xx":0.05,"d_xp":0.01,"d_pp":0.001,"c_xp":0.04,"c_pp":0.002}]}"#;
        let src = CoefficientSource::from_json(text).unwrap();
        let a = src.lme_at(0.1, 16.0, 4.0).unwrap();
        let b = src.lme_at(0.2, 16.0, 4.0).unwrap();
        assert!((b.d_mu - 2.0 * a.d_mu).abs() < 1e-15);
        let err = src.lme_at(0.1, 16.0, 5.0).unwrap_err();
        assert_eq!(err.reason, CellError::COEFFICIENTS_MISSING);
    }

    #[test]
    fn single_file_form() {
        let text = r#"{"d_xx":0.05,"d_xp":0.01,"d_pp":0.001,"c_xp":0.04,"c_pp":0.002,"g_ref":0.1}"#;
        assert!(matches!(CoefficientSource::from_json(text).unwrap(), CoefficientSource::File(_)));
        let bad = r#"{"d_xx":-1,"d_xp":0.01,"d_pp":0.001,"c_xp":0.04,"c_pp":0.002}"#;
        assert!(matches!(CoefficientSource::from_json(bad), Err(SweepError::Config { .. })));
    }
}
