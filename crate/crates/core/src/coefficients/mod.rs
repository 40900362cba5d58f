//! Master-equation coefficients in natural units (ħ = m = Ω = k_B = 1).
//!
//! Everything here is a pure function of [`ModelParams`]: the Lorentz–Drude
//! spectral density, the Born–Markov coefficients `C_p, C_x, D_x, D_p`, the
//! linear-coupling Lindblad coefficients `Γ, D_XX, D_XP, D_PP`, and the nine
//! dissipator coefficients of the quadratic-coupling equation.

mod digamma;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::digamma::{digamma, digamma_real, DigammaError, EULER_GAMMA};

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    InvalidParameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("division by a vanishing `{0}`")]
    Degenerate(&'static str),
    #[error(transparent)]
    Digamma(#[from] DigammaError),
    #[error("cannot read coefficient file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed coefficient file: {0}")]
    Parse(#[from] serde_json::Error),
}

fn require(field: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), CoefficientError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(CoefficientError::InvalidParameter { field, value, reason })
    }
}

/// Dimensionless bath and particle parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Damping ratio γ/Ω.
    pub g: f64,
    /// Cutoff ratio Λ/Ω.
    pub lam: f64,
    /// Temperature ratio k_B T / ħΩ.
    pub tau: f64,
    /// Counter-term weight.
    #[serde(default)]
    pub r: f64,
}

impl ModelParams {
    pub fn new(g: f64, lam: f64, tau: f64) -> Result<Self, CoefficientError> {
        Self::with_counter_term(g, lam, tau, 0.0)
    }

    pub fn with_counter_term(g: f64, lam: f64, tau: f64, r: f64) -> Result<Self, CoefficientError> {
        let p = ModelParams { g, lam, tau, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CoefficientError> {
        require("g", self.g, self.g > 0.0, "damping ratio must be positive")?;
        require("lam", self.lam, self.lam > 0.0, "cutoff ratio must be positive")?;
        require("tau", self.tau, self.tau >= 0.0, "temperature must be non-negative")?;
        require("r", self.r, true, "counter-term weight must be finite")
    }

    /// Outside the perturbative regime γ ≲ Ω the second-order coefficients
    /// are not trustworthy. Reported, never rejected.
    pub fn perturbative_warning(&self) -> bool {
        self.g > 1.0
    }
}

/// coth(1/(2τ)), equal to 1 at τ = 0.
pub fn thermal_factor(tau: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else {
        1.0 / (0.5 / tau).tanh()
    }
}

/// Lorentz–Drude spectral density J(ω) = (g/π) ω / (1 + ω²/Λ²).
pub fn spectral_density(omega: f64, p: &ModelParams) -> f64 {
    debug_assert!(omega >= 0.0);
    (p.g / PI) * omega / (1.0 + (omega / p.lam).powi(2))
}

/// Born–Markov coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmmeCoefficients {
    pub c_p: f64,
    pub c_x: f64,
    pub d_x: f64,
    pub d_p: f64,
}

pub fn bmme_coefficients(p: &ModelParams) -> Result<BmmeCoefficients, CoefficientError> {
    p.validate()?;
    let lam2 = p.lam * p.lam;
    let c_p = 0.5 * p.g * lam2 / (1.0 + lam2);
    let c_x = -p.lam * c_p;
    let d_x = c_p * thermal_factor(p.tau);
    let d_p = 2.0 * c_p / PI * momentum_diffusion_bracket(p.lam, p.tau)?;
    Ok(BmmeCoefficients { c_p, c_x, d_x, d_p })
}

/// πτ/Λ + ψ(Λ/(2πτ)) − Re ψ(i/(2πτ)); its τ → 0 limit is ln Λ.
fn momentum_diffusion_bracket(lam: f64, tau: f64) -> Result<f64, CoefficientError> {
    let y = 1.0 / (2.0 * PI * tau);
    if tau == 0.0 || !(lam * y).is_finite() {
        return Ok(lam.ln());
    }
    let a = digamma_real(lam * y)?;
    let b = digamma(Complex64::new(0.0, y))?.re;
    Ok(PI * tau / lam + a - b)
}

/// Coefficients of the linear-coupling Lindblad equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearLmeCoefficients {
    pub gamma: f64,
    pub d_xx: f64,
    pub d_xp: f64,
    pub d_pp: f64,
}

pub fn linear_lme_coefficients(b: &BmmeCoefficients) -> Result<LinearLmeCoefficients, CoefficientError> {
    let d_xx = 2.0 * b.d_x;
    if d_xx == 0.0 {
        return Err(CoefficientError::Degenerate("D_XX"));
    }
    let gamma = b.c_p;
    let d_xp = b.d_p;
    Ok(LinearLmeCoefficients {
        gamma,
        d_xx,
        d_xp,
        d_pp: (gamma * gamma + d_xp * d_xp) / d_xx,
    })
}

impl LinearLmeCoefficients {
    pub fn from_params(p: &ModelParams) -> Result<Self, CoefficientError> {
        linear_lme_coefficients(&bmme_coefficients(p)?)
    }

    /// Forward map from the single Lindblad operator αX + βP.
    pub fn from_alpha_beta(alpha: Complex64, beta: Complex64) -> Self {
        let ab = alpha.conj() * beta;
        LinearLmeCoefficients {
            gamma: ab.im,
            d_xx: alpha.norm_sqr(),
            d_xp: ab.re,
            d_pp: beta.norm_sqr(),
        }
    }

    /// The Born–Markov generator: identical except that the position
    /// diffusion term is absent.
    pub fn without_position_diffusion(&self) -> Self {
        LinearLmeCoefficients { d_pp: 0.0, ..*self }
    }

    /// Kossakowski matrix in the (X, P) operator basis,
    /// [[D_XX, D_XP − iΓ], [D_XP + iΓ, D_PP]].
    pub fn kossakowski(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.d_xx, 0.0), Complex64::new(self.d_xp, -self.gamma)],
            [Complex64::new(self.d_xp, self.gamma), Complex64::new(self.d_pp, 0.0)],
        ]
    }

    /// Smallest eigenvalue of [`Self::kossakowski`]; non-negative iff the
    /// generator is of Lindblad form.
    pub fn kossakowski_min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.d_xx + self.d_pp);
        let half_gap = (0.25 * (self.d_xx - self.d_pp).powi(2) + self.d_xp.powi(2) + self.gamma.powi(2)).sqrt();
        mean - half_gap
    }

    /// d_PP·d_XX − Γ² − d_XP², zero for coefficients built from one operator.
    pub fn identity_residual(&self) -> f64 {
        self.d_pp * self.d_xx - self.gamma * self.gamma - self.d_xp * self.d_xp
    }
}

/// α > 0 and β with Im β > 0 such that L = αX + βP reproduces `c`.
pub fn lindblad_alpha_beta(c: &LinearLmeCoefficients) -> Result<(f64, Complex64), CoefficientError> {
    require("d_xx", c.d_xx, c.d_xx > 0.0, "position-noise coefficient must be positive")?;
    require("gamma", c.gamma, c.gamma > 0.0, "damping must be positive")?;
    let alpha = c.d_xx.sqrt();
    Ok((alpha, Complex64::new(c.d_xp / alpha, c.gamma / alpha)))
}

/// Externally supplied Born–Markov coefficients for quadratic coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBaseCoefficients {
    pub d_xx: f64,
    pub d_xp: f64,
    pub d_pp: f64,
    pub c_xp: f64,
    pub c_pp: f64,
}

impl QuadraticBaseCoefficients {
    pub fn validate(&self) -> Result<(), CoefficientError> {
        require("d_xx", self.d_xx, self.d_xx > 0.0, "must be positive")?;
        require("d_xp", self.d_xp, true, "must be finite")?;
        require("d_pp", self.d_pp, true, "must be finite")?;
        require("c_xp", self.c_xp, true, "must be finite")?;
        require("c_pp", self.c_pp, true, "must be finite")
    }

    pub fn scaled(&self, s: f64) -> Self {
        QuadraticBaseCoefficients {
            d_xx: self.d_xx * s,
            d_xp: self.d_xp * s,
            d_pp: self.d_pp * s,
            c_xp: self.c_xp * s,
            c_pp: self.c_pp * s,
        }
    }

    /// A NON-PHYSICAL stand-in for the quadratic-coupling coefficients, built
    /// from the linear Lorentz–Drude damping so that it has the right scaling
    /// with g and a vanishing extra-term content toward high τ and Λ:
    ///
    /// c_xp = C_p tanh(1/(2τ)), d_xx = C_p, d_xp = c_xp/Λ, d_pp = c_pp = c_xp/Λ².
    ///
    /// Used for demonstrations and property tests only; real coefficient sets
    /// must be supplied through a file.
    pub fn linear_analogue_surrogate(p: &ModelParams) -> Result<Self, CoefficientError> {
        let b = bmme_coefficients(p)?;
        let c_xp = b.c_p / thermal_factor(p.tau);
        Ok(QuadraticBaseCoefficients {
            d_xx: b.c_p,
            d_xp: c_xp / p.lam,
            d_pp: c_xp / (p.lam * p.lam),
            c_xp,
            c_pp: c_xp / (p.lam * p.lam),
        })
    }
}

/// On-disk form of [`QuadraticBaseCoefficients`]. `g_ref`, when present, is
/// the damping ratio the values were produced at; every second-order
/// coefficient is proportional to g, so other damping ratios rescale linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoefficientFile {
    #[serde(flatten)]
    pub coefficients: QuadraticBaseCoefficients,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl QuadraticCoefficientFile {
    pub fn from_json(text: &str) -> Result<Self, CoefficientError> {
        let file: QuadraticCoefficientFile = serde_json::from_str(text)?;
        file.coefficients.validate()?;
        if let Some(g) = file.g_ref {
            require("g_ref", g, g > 0.0, "reference damping must be positive")?;
        }
        Ok(file)
    }

    pub fn from_path(path: &Path) -> Result<Self, CoefficientError> {
        let text = fs::read_to_string(path).map_err(|source| CoefficientError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Coefficients at damping ratio `g`.
    pub fn at(&self, g: f64) -> QuadraticBaseCoefficients {
        match self.g_ref {
            Some(g_ref) => self.coefficients.scaled(g / g_ref),
            None => self.coefficients,
        }
    }
}

/// Dissipator coefficients of the quadratic-coupling Lindblad equation with
/// operator A = μX² + ν{X,P} + εP².
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraticLmeCoefficients {
    pub d_mu: f64,
    pub d_nu: f64,
    pub d_eps: f64,
    pub d_munu: f64,
    pub d_mueps: f64,
    pub d_epsnu: f64,
    pub c_munu: f64,
    pub c_mueps: f64,
    pub c_epsnu: f64,
}

pub fn quadratic_lme_coefficients(q: &QuadraticBaseCoefficients) -> Result<QuadraticLmeCoefficients, CoefficientError> {
    q.validate()?;
    let d_mu = 2.0 * q.d_xx;
    let d_mueps = q.d_pp;
    let d_munu = q.d_xp;
    let c_mueps = q.c_pp;
    let c_munu = q.c_xp;
    Ok(QuadraticLmeCoefficients {
        d_mu,
        d_nu: (d_munu * d_munu + c_munu * c_munu) / d_mu,
        d_eps: (d_mueps * d_mueps + c_mueps * c_mueps) / d_mu,
        d_munu,
        d_mueps,
        d_epsnu: (d_munu * d_mueps + c_munu * c_mueps) / d_mu,
        c_munu,
        c_mueps,
        c_epsnu: (c_munu * d_mueps - d_munu * c_mueps) / d_mu,
    })
}

impl QuadraticLmeCoefficients {
    /// D_ab = Re(a*b), C_ab = Im(a*b) for the operator coefficients μ, ν, ε.
    pub fn from_lindblad_operator(mu: Complex64, nu: Complex64, eps: Complex64) -> Self {
        let munu = mu.conj() * nu;
        let mueps = mu.conj() * eps;
        let epsnu = eps.conj() * nu;
        QuadraticLmeCoefficients {
            d_mu: mu.norm_sqr(),
            d_nu: nu.norm_sqr(),
            d_eps: eps.norm_sqr(),
            d_munu: munu.re,
            d_mueps: mueps.re,
            d_epsnu: epsnu.re,
            c_munu: munu.im,
            c_mueps: mueps.im,
            c_epsnu: epsnu.im,
        }
    }

    /// (μ, ν, ε) with μ real and positive. Requires D_μ > 0.
    pub fn lindblad_operator(&self) -> Result<(Complex64, Complex64, Complex64), CoefficientError> {
        require("d_mu", self.d_mu, self.d_mu > 0.0, "must be positive")?;
        let mu = self.d_mu.sqrt();
        Ok((
            Complex64::new(mu, 0.0),
            Complex64::new(self.d_munu, self.c_munu) / mu,
            Complex64::new(self.d_mueps, self.c_mueps) / mu,
        ))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        for v in out.as_mut_array() {
            *v *= s;
        }
        out
    }

    /// Scales only the terms absent from the Born–Markov equation.
    pub fn with_extra_terms_scaled(&self, s: f64) -> Self {
        QuadraticLmeCoefficients {
            d_nu: self.d_nu * s,
            d_eps: self.d_eps * s,
            d_epsnu: self.d_epsnu * s,
            c_epsnu: self.c_epsnu * s,
            ..*self
        }
    }

    /// D_ν D_μ − D_μν² − C_μν² and D_ε D_μ − D_με² − C_με².
    pub fn identity_residuals(&self) -> (f64, f64) {
        (
            self.d_nu * self.d_mu - self.d_munu.powi(2) - self.c_munu.powi(2),
            self.d_eps * self.d_mu - self.d_mueps.powi(2) - self.c_mueps.powi(2),
        )
    }

    pub fn as_array(&self) -> [f64; 9] {
        [
            self.d_mu,
            self.d_nu,
            self.d_eps,
            self.d_munu,
            self.d_mueps,
            self.d_epsnu,
            self.c_munu,
            self.c_mueps,
            self.c_epsnu,
        ]
    }

    fn as_mut_array(&mut self) -> [&mut f64; 9] {
        [
            &mut self.d_mu,
            &mut self.d_nu,
            &mut self.d_eps,
            &mut self.d_munu,
            &mut self.d_mueps,
            &mut self.d_epsnu,
            &mut self.c_munu,
            &mut self.c_mueps,
            &mut self.c_epsnu,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn params_are_validated() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.1, -1.0, 1.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, -1e-3).is_err());
        assert!(ModelParams::new(0.1, 1.0, f64::NAN).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.0).is_ok());
        assert!(ModelParams::new(1.5, 1.0, 1.0).unwrap().perturbative_warning());
        assert!(!ModelParams::new(1.0, 1.0, 1.0).unwrap().perturbative_warning());
    }

    #[test]
    fn spectral_density_values() {
        let p = ModelParams::new(0.8, 10.0, 1.0).unwrap();
        assert_eq!(spectral_density(0.0, &p), 0.0);
        assert!(rel(spectral_density(10.0, &p), 0.8 * 10.0 / (2.0 * PI)) < 1e-15);
        let w = 1e8;
        assert!(rel(spectral_density(w, &p), 100.0 * 0.8 / (PI * w)) < 1e-10);
    }

    #[test]
    fn bmme_values() {
        // lam = 1 gives c_p = g/4
        let b = bmme_coefficients(&ModelParams::new(0.8, 1.0, 1e3).unwrap()).unwrap();
        assert!(rel(b.c_p, 0.2) < 1e-15);
        assert!(rel(b.c_x, -0.2) < 1e-15);

        // Arbitrary-precision reference (40 digits) for (0.8, 10, 0.5).
        let b = bmme_coefficients(&ModelParams::new(0.8, 10.0, 0.5).unwrap()).unwrap();
        assert!(rel(b.c_p, 0.396_039_603_960_396_04) < 1e-14);
        assert!(rel(b.d_x, 0.520_013_974_455_180_71) < 1e-14);
        assert!(rel(b.d_p, 0.407_139_701_659_493_21) < 1e-12);
    }

    #[test]
    fn zero_temperature_limit() {
        let p0 = ModelParams::new(0.8, 10.0, 0.0).unwrap();
        let b0 = bmme_coefficients(&p0).unwrap();
        assert_eq!(b0.d_x, b0.c_p);
        assert!(rel(b0.d_p, 2.0 * b0.c_p / PI * 10f64.ln()) < 1e-15);
        // Continuity: small but finite tau approaches the analytic limit.
        let b = bmme_coefficients(&ModelParams::new(0.8, 10.0, 1e-4).unwrap()).unwrap();
        assert!(rel(b.d_x, b.c_p) < 1e-15);
        assert!(rel(b.d_p, b0.d_p) < 1e-3);
    }

    #[test]
    fn linear_lme_cl_limit() {
        let p = ModelParams::new(0.1, 10.0, 1000.0).unwrap();
        let c = LinearLmeCoefficients::from_params(&p).unwrap();
        let ratio = c.gamma / (p.g / 2.0);
        assert!((0.98..=1.0).contains(&ratio), "{ratio}");
        assert!(rel(c.d_xx, 2.0 * p.g * p.tau) < 0.05);
        // D_XP ≈ −γT/Λ
        assert!(rel(c.d_xp, -p.g * p.tau / p.lam) < 0.05);
    }

    #[test]
    fn alpha_beta_examples() {
        let c = LinearLmeCoefficients { gamma: 1.0, d_xx: 4.0, d_xp: 0.0, d_pp: 0.25 };
        let (a, b) = lindblad_alpha_beta(&c).unwrap();
        assert_eq!(a, 2.0);
        assert_eq!(b, Complex64::new(0.0, 0.5));

        let c = LinearLmeCoefficients { gamma: 1.0, d_xx: 1.0, d_xp: 1.0, d_pp: 2.0 };
        let (a, b) = lindblad_alpha_beta(&c).unwrap();
        assert_eq!(a, 1.0);
        assert_eq!(b, Complex64::new(1.0, 1.0));

        let c = LinearLmeCoefficients::from_params(&ModelParams::new(0.8, 10.0, 0.5).unwrap()).unwrap();
        let (a, b) = lindblad_alpha_beta(&c).unwrap();
        assert!(b.im > 0.0);
        let back = LinearLmeCoefficients::from_alpha_beta(Complex64::new(a, 0.0), b);
        assert!(rel(back.gamma, c.gamma) < 1e-12);
        assert!(rel(back.d_xx, c.d_xx) < 1e-12);
        assert!(rel(back.d_xp, c.d_xp) < 1e-12);
        assert!(rel(back.d_pp, c.d_pp) < 1e-12);
    }

    #[test]
    fn kossakowski_signature() {
        let c = LinearLmeCoefficients::from_params(&ModelParams::new(0.8, 10.0, 0.1).unwrap()).unwrap();
        assert!(c.kossakowski_min_eigenvalue() > -1e-12 * c.d_xx);
        assert!(c.without_position_diffusion().kossakowski_min_eigenvalue() < 0.0);
    }

    #[test]
    fn quadratic_examples() {
        let zero_c = QuadraticBaseCoefficients { d_xx: 2.0, d_xp: 1.5, d_pp: 0.7, c_xp: 0.0, c_pp: 0.0 };
        let q = quadratic_lme_coefficients(&zero_c).unwrap();
        assert_eq!(q.c_epsnu, 0.0);
        assert!(rel(q.d_epsnu, 1.5 * 0.7 / 4.0) < 1e-15);

        let trivial = QuadraticBaseCoefficients { d_xx: 1.0, d_xp: 0.0, d_pp: 0.0, c_xp: 0.0, c_pp: 0.0 };
        let q = quadratic_lme_coefficients(&trivial).unwrap();
        assert_eq!(q.d_mu, 2.0);
        assert_eq!(q.as_array()[1..], [0.0; 8]);

        // Exact rational arithmetic: D_epsnu = 31/40, C_epsnu = 13/40,
        // D_eps = 113/50, D_nu = 5/16.
        let base = QuadraticBaseCoefficients { d_xx: 2.0, d_xp: 1.0, d_pp: 3.0, c_xp: 0.5, c_pp: 0.2 };
        let q = quadratic_lme_coefficients(&base).unwrap();
        let expected = [4.0, 5.0 / 16.0, 113.0 / 50.0, 1.0, 3.0, 31.0 / 40.0, 0.5, 0.2, 13.0 / 40.0];
        for (got, want) in q.as_array().iter().zip(expected) {
            assert!(rel(*got, want) < 1e-15, "{got} vs {want}");
        }

        let bad = QuadraticBaseCoefficients { d_xx: 0.0, ..base };
        assert!(quadratic_lme_coefficients(&bad).is_err());
    }

    #[test]
    fn quadratic_operator_round_trip() {
        let base = QuadraticBaseCoefficients { d_xx: 0.7, d_xp: -0.3, d_pp: 0.2, c_xp: 0.4, c_pp: -0.1 };
        let q = quadratic_lme_coefficients(&base).unwrap();
        let (mu, nu, eps) = q.lindblad_operator().unwrap();
        let back = QuadraticLmeCoefficients::from_lindblad_operator(mu, nu, eps);
        for (a, b) in back.as_array().iter().zip(q.as_array()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficient_file_parsing() {
        let text = r#"{"d_xx": 0.5, "d_xp": 0.01, "d_pp": 0.0, "c_xp": 0.05, "c_pp": 0.0, "g_ref": 0.1, "note": "placeholder"}"#;
        let f = QuadraticCoefficientFile::from_json(text).unwrap();
        assert_eq!(f.at(0.2).d_xx, 1.0);
        assert!(QuadraticCoefficientFile::from_json(r#"{"d_xx": -1, "d_xp": 0, "d_pp": 0, "c_xp": 0, "c_pp": 0}"#).is_err());
        assert!(QuadraticCoefficientFile::from_json(r#"{"d_xx": 1}"#).is_err());
    }

    #[test]
    fn surrogate_extra_terms_vanish_toward_cl_corner() {
        let extra = |tau: f64, lam: f64| {
            let p = ModelParams::new(0.1, lam, tau).unwrap();
            let q = quadratic_lme_coefficients(&QuadraticBaseCoefficients::linear_analogue_surrogate(&p).unwrap()).unwrap();
            q.d_nu / q.d_mu
        };
        assert!(extra(10.0, 100.0) < 1e-2 * extra(0.1, 2.0));
    }
}
