//! Normal-ordered polynomials in a, a† and their zero-mean Gaussian
//! expectation values.
//!
//! A polynomial is a map (i, j) → coefficient of a†^i a^j. Products are
//! re-ordered with a^j a†^k = Σ_m C(j,m) C(k,m) m! a†^(k−m) a^(j−m), so all
//! algebra is exact; matrix representations are exact truncations of the
//! infinite matrices.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linear_dynamics::GaussianState;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalPoly {
    terms: BTreeMap<(u32, u32), Complex64>,
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

fn double_factorial_odd(n: u32) -> f64 {
    // (n−1)!! for even n, the number of perfect pairings of n objects
    if n % 2 == 1 {
        return 0.0;
    }
    (1..n).step_by(2).fold(1.0, |acc, i| acc * i as f64)
}

impl NormalPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn identity() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// c · a†^i a^j.
    pub fn monomial(i: u32, j: u32, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(i, j, c);
        p
    }

    pub fn a() -> Self {
        Self::monomial(0, 1, Complex64::new(1.0, 0.0))
    }

    pub fn adag() -> Self {
        Self::monomial(1, 0, Complex64::new(1.0, 0.0))
    }

    /// X = (a + a†)/√2.
    pub fn x() -> Self {
        (Self::a() + Self::adag()).scale(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    /// P = i(a† − a)/√2.
    pub fn p() -> Self {
        (Self::adag() - Self::a()).scale(I * std::f64::consts::FRAC_1_SQRT_2)
    }

    /// c_a a + c_ad a† + c_1.
    pub fn linear(c_a: Complex64, c_ad: Complex64, c_1: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(0, 1, c_a);
        p.add_term(1, 0, c_ad);
        p.add_term(0, 0, c_1);
        p
    }

    pub fn add_term(&mut self, i: u32, j: u32, c: Complex64) {
        if c == ZERO {
            return;
        }
        let e = self.terms.entry((i, j)).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&(i, j));
        }
    }

    pub fn coefficient(&self, i: u32, j: u32) -> Complex64 {
        self.terms.get(&(i, j)).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), Complex64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &v) in &self.terms {
            out.add_term(i, j, v * c);
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &v) in &self.terms {
            out.add_term(j, i, v.conj());
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self * other - other * self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        self * other + other * self
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// ⟨·⟩ in the zero-mean Gaussian state with ⟨a†a⟩ = n, ⟨aa⟩ = m.
    pub fn expectation(&self, g: &LadderGaussian) -> Complex64 {
        self.terms.iter().map(|(&(i, j), &c)| c * g.normal_moment(i, j)).sum()
    }

    /// Exact N×N truncation of the operator.
    pub fn to_matrix(&self, dim: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for (&(i, j), &c) in &self.terms {
            let (i, j) = (i as usize, j as usize);
            for n in j..dim {
                let row = n - j + i;
                if row >= dim {
                    break;
                }
                // a^j|n⟩ = sqrt(n!/(n−j)!)|n−j⟩, a†^i|k⟩ = sqrt((k+i)!/k!)|k+i⟩
                let down: f64 = (0..j).map(|k| (n - k) as f64).product();
                let up: f64 = (1..=i).map(|k| (n - j + k) as f64).product();
                m[(row, n)] += c * (down * up).sqrt();
            }
        }
        m
    }
}

impl Add for NormalPoly {
    type Output = NormalPoly;
    fn add(self, rhs: NormalPoly) -> NormalPoly {
        &self + &rhs
    }
}

impl Add for &NormalPoly {
    type Output = NormalPoly;
    fn add(self, rhs: &NormalPoly) -> NormalPoly {
        let mut out = self.clone();
        for (&(i, j), &v) in &rhs.terms {
            out.add_term(i, j, v);
        }
        out
    }
}

impl Sub for NormalPoly {
    type Output = NormalPoly;
    fn sub(self, rhs: NormalPoly) -> NormalPoly {
        &self - &rhs
    }
}

impl Sub for &NormalPoly {
    type Output = NormalPoly;
    fn sub(self, rhs: &NormalPoly) -> NormalPoly {
        let mut out = self.clone();
        for (&(i, j), &v) in &rhs.terms {
            out.add_term(i, j, -v);
        }
        out
    }
}

impl Neg for &NormalPoly {
    type Output = NormalPoly;
    fn neg(self) -> NormalPoly {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &NormalPoly {
    type Output = NormalPoly;
    fn mul(self, rhs: &NormalPoly) -> NormalPoly {
        let mut out = NormalPoly::zero();
        for (&(i, j), &u) in &self.terms {
            for (&(k, l), &v) in &rhs.terms {
                for m in 0..=j.min(k) {
                    let w = binomial(j, m) * binomial(k, m) * factorial(m);
                    out.add_term(i + k - m, j - m + l, u * v * w);
                }
            }
        }
        out
    }
}

impl Mul for NormalPoly {
    type Output = NormalPoly;
    fn mul(self, rhs: NormalPoly) -> NormalPoly {
        &self * &rhs
    }
}

/// Contractions of a zero-mean Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderGaussian {
    /// ⟨a†a⟩
    pub n: f64,
    /// ⟨aa⟩
    pub m: Complex64,
}

impl LadderGaussian {
    pub fn from_state(s: &GaussianState) -> Self {
        let (x2, xp, p2) = s.symmetric_moments();
        LadderGaussian {
            n: 0.5 * (x2 + p2) - 0.5,
            m: Complex64::new(0.5 * (x2 - p2), xp),
        }
    }

    pub fn thermal(n: f64) -> Self {
        LadderGaussian { n, m: ZERO }
    }

    /// ⟨a†^i a^j⟩ by Wick's theorem.
    pub fn normal_moment(&self, i: u32, j: u32) -> Complex64 {
        if (i + j) % 2 == 1 {
            return ZERO;
        }
        let mut total = ZERO;
        for k in 0..=i.min(j) {
            let (ri, rj) = (i - k, j - k);
            if ri % 2 == 1 || rj % 2 == 1 {
                continue;
            }
            let w = binomial(i, k) * binomial(j, k) * factorial(k) * double_factorial_odd(ri) * double_factorial_odd(rj);
            total += self.m.conj().powu(ri / 2) * self.m.powu(rj / 2) * (w * self.n.powi(k as i32));
        }
        total
    }
}

/// X², P², {X,P}.
pub fn quadratic_observables() -> [NormalPoly; 3] {
    let x = NormalPoly::x();
    let p = NormalPoly::p();
    [&x * &x, &p * &p, x.anticommutator(&p)]
}

/// One term of a master equation in commutator form, for Heisenberg-picture
/// evaluation.
#[derive(Debug, Clone)]
pub enum CommutatorTerm {
    /// −i[H, ρ]
    Hamiltonian(NormalPoly),
    /// −coef [A, [B, ρ]]
    DoubleCommutator { coef: f64, a: NormalPoly, b: NormalPoly },
    /// −i coef [A, {B, ρ}]
    CommutatorAnticommutator { coef: f64, a: NormalPoly, b: NormalPoly },
}

impl CommutatorTerm {
    /// The adjoint action on an observable: d⟨O⟩/dt = ⟨adjoint(O)⟩.
    pub fn adjoint_action(&self, o: &NormalPoly) -> NormalPoly {
        match self {
            CommutatorTerm::Hamiltonian(h) => h.commutator(o).scale(I),
            CommutatorTerm::DoubleCommutator { coef, a, b } => o.commutator(a).commutator(b).scale(Complex64::new(-coef, 0.0)),
            CommutatorTerm::CommutatorAnticommutator { coef, a, b } => o.commutator(a).anticommutator(b).scale(Complex64::new(0.0, -coef)),
        }
    }
}

/// d⟨O⟩/dt = ⟨Σ adjoint(O)⟩ for the given generator terms.
pub fn heisenberg_rate(terms: &[CommutatorTerm], o: &NormalPoly, g: &LadderGaussian) -> Complex64 {
    terms.iter().map(|t| t.adjoint_action(o).expectation(g)).sum()
}
