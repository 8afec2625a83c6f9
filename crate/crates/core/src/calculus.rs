//! Diagonal functional calculus for the operators `L`, `J`, `B_c` and `A_c`.
//!
//! The operator `L` is represented by its eigenvalues `λ_k ≥ 0`; every state
//! is stored as coefficients in the eigenbasis, one complex number per mode.
//! Functions of `L` act by multiplying mode `k` with a scalar symbol.
//!
//! The complex structure `J` commutes with `L` and acts within a mode. Two
//! realizations are supported:
//!
//! * [`ComplexStructure::ImaginaryUnit`]: coefficients are genuinely complex
//!   and `J` multiplies by `i`.
//! * [`ComplexStructure::CanonicalSymplectic`]: each coefficient packs a real
//!   pair `(q_k, q_{k+d})` as `q_k + i q_{k+d}` and `J` is the canonical block
//!   `[[0, I], [-I, 0]]`, i.e. `(a, b) ↦ (b, -a)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Realization of the complex structure `J` (`J² = -I`, `J* = -J`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexStructure {
    ImaginaryUnit,
    CanonicalSymplectic,
}

impl ComplexStructure {
    /// Applies `J` to one mode coefficient.
    #[inline]
    pub fn apply(self, z: Complex64) -> Complex64 {
        match self {
            ComplexStructure::ImaginaryUnit => Complex64::new(-z.im, z.re),
            ComplexStructure::CanonicalSymplectic => Complex64::new(z.im, -z.re),
        }
    }

    /// Applies `e^{sJ} = cos(s) I + sin(s) J` given `(cos s, sin s)`.
    #[inline]
    pub fn rotate(self, z: Complex64, cos: f64, sin: f64) -> Complex64 {
        match self {
            ComplexStructure::ImaginaryUnit => {
                Complex64::new(z.re * cos - z.im * sin, z.re * sin + z.im * cos)
            }
            ComplexStructure::CanonicalSymplectic => {
                Complex64::new(z.re * cos + z.im * sin, z.im * cos - z.re * sin)
            }
        }
    }

    /// Complex multiplier equivalent to `e^{sJ}` on the packed coefficient.
    #[inline]
    pub fn phase(self, s: f64) -> Complex64 {
        match self {
            ComplexStructure::ImaginaryUnit => Complex64::cis(s),
            ComplexStructure::CanonicalSymplectic => Complex64::cis(-s),
        }
    }
}

/// Eigenvalues of `L` together with the complex structure `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    structure: ComplexStructure,
}

impl SpectralBasis {
    pub fn new(eigenvalues: Vec<f64>, structure: ComplexStructure) -> Result<Self> {
        if let Some(bad) = eigenvalues.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::Domain(format!(
                "eigenvalues of L must be finite and non-negative, got {bad}"
            )));
        }
        Ok(Self {
            eigenvalues,
            structure,
        })
    }

    /// `L = 0` on `n` modes.
    pub fn zero(n: usize, structure: ComplexStructure) -> Self {
        Self {
            eigenvalues: vec![0.0; n],
            structure,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn structure(&self) -> ComplexStructure {
        self.structure
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    /// Applies `J` to a single block.
    pub fn apply_j(&self, block: &[Complex64]) -> Vec<Complex64> {
        block.iter().map(|&z| self.structure.apply(z)).collect()
    }

    /// Applies `e^{sJ}` to a single block.
    pub fn rotate_block(&self, block: &[Complex64], s: f64) -> Vec<Complex64> {
        let (sin, cos) = s.sin_cos();
        block
            .iter()
            .map(|&z| self.structure.rotate(z, cos, sin))
            .collect()
    }
}

/// A pair `w = (u, v)` of coefficient arrays in the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl StateVector {
    pub fn new(u: Vec<Complex64>, v: Vec<Complex64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: v.len(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); n],
            v: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.u.iter().chain(&self.v).map(|z| z.norm_sqr()).sum()
    }

    /// `sqrt(‖u‖² + ‖v‖²)`.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|z| z.is_finite())
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &StateVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            *a += b * alpha;
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.u
            .iter_mut()
            .chain(self.v.iter_mut())
            .for_each(|z| *z *= alpha);
    }

    pub fn sub(&self, other: &StateVector) -> StateVector {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    /// Distance `‖self - other‖`.
    pub fn distance(&self, other: &StateVector) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Same state with mode `k` scaled by `weights[k]` in both blocks.
    pub fn weighted(&self, weights: &[f64]) -> StateVector {
        StateVector {
            u: self.u.iter().zip(weights).map(|(z, w)| z * w).collect(),
            v: self.v.iter().zip(weights).map(|(z, w)| z * w).collect(),
        }
    }

    fn check(&self, basis: &SpectralBasis) -> Result<()> {
        basis.check_len(self.u.len())?;
        basis.check_len(self.v.len())
    }
}

fn check_speed(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    Ok(())
}

/// Symbol of `A_c = c² B_c − c²`, evaluated as `cλ / (√(λ + c²) + c)`.
///
/// The algebraically equal form `c(√(λ + c²) − c)` cancels catastrophically
/// once `λ ≪ c²`.
pub fn ac_symbol(lambda: f64, c: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!(
            "λ must be non-negative, got {lambda}"
        )));
    }
    check_speed(c)?;
    Ok(ac_symbol_unchecked(lambda, c))
}

#[inline]
pub(crate) fn ac_symbol_unchecked(lambda: f64, c: f64) -> f64 {
    c * lambda / ((lambda + c * c).sqrt() + c)
}

/// Symbol of `B_c⁻¹`, i.e. `c / √(λ + c²) ∈ (0, 1]`.
pub fn bc_inv_symbol(lambda: f64, c: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!(
            "λ must be non-negative, got {lambda}"
        )));
    }
    check_speed(c)?;
    Ok(bc_inv_symbol_unchecked(lambda, c))
}

#[inline]
pub(crate) fn bc_inv_symbol_unchecked(lambda: f64, c: f64) -> f64 {
    // c/√(λ+c²) written as 1/√(1 + λ/c²) stays in (0, 1] without overflow.
    1.0 / (1.0 + lambda / (c * c)).sqrt()
}

/// Per-mode symbols of `A_c` and `B_c⁻¹` for a fixed `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbols {
    pub c: f64,
    pub ac: Vec<f64>,
    pub bc_inv: Vec<f64>,
}

impl Symbols {
    pub fn new(basis: &SpectralBasis, c: f64) -> Result<Self> {
        check_speed(c)?;
        let ac = basis
            .eigenvalues()
            .iter()
            .map(|&l| ac_symbol_unchecked(l, c))
            .collect();
        let bc_inv = basis
            .eigenvalues()
            .iter()
            .map(|&l| bc_inv_symbol_unchecked(l, c))
            .collect();
        Ok(Self { c, ac, bc_inv })
    }

    /// Fast period `T = 2π / c²`.
    pub fn fast_period(&self) -> f64 {
        2.0 * PI / (self.c * self.c)
    }
}

pub fn apply_bc_inv(w: &StateVector, basis: &SpectralBasis, c: f64) -> Result<StateVector> {
    w.check(basis)?;
    let symbols = Symbols::new(basis, c)?;
    Ok(w.weighted(&symbols.bc_inv))
}

pub fn apply_ac(w: &StateVector, basis: &SpectralBasis, c: f64) -> Result<StateVector> {
    w.check(basis)?;
    let symbols = Symbols::new(basis, c)?;
    Ok(w.weighted(&symbols.ac))
}

/// `e^{s𝒥}` with `𝒥 = diag(J, −J)`: rotates `u` by `+s` and `v` by `−s`.
pub fn rotate_fast(w: &StateVector, s: f64, basis: &SpectralBasis) -> Result<StateVector> {
    w.check(basis)?;
    Ok(rotate_fast_with(w, s, basis.structure()))
}

pub(crate) fn rotate_fast_with(w: &StateVector, s: f64, j: ComplexStructure) -> StateVector {
    let (sin, cos) = s.sin_cos();
    StateVector {
        u: w.u.iter().map(|&z| j.rotate(z, cos, sin)).collect(),
        v: w.v.iter().map(|&z| j.rotate(z, cos, -sin)).collect(),
    }
}

/// `e^{t𝒥A_c}`: mode `k` of `u` rotates by `t a_c(λ_k)`, of `v` by `−t a_c(λ_k)`.
pub fn semigroup_jac(
    w: &StateVector,
    t: f64,
    basis: &SpectralBasis,
    c: f64,
) -> Result<StateVector> {
    w.check(basis)?;
    let symbols = Symbols::new(basis, c)?;
    Ok(semigroup_with(w, t, basis.structure(), &symbols.ac))
}

pub(crate) fn semigroup_with(
    w: &StateVector,
    t: f64,
    j: ComplexStructure,
    ac: &[f64],
) -> StateVector {
    let mut out = w.clone();
    for k in 0..ac.len() {
        if ac[k] == 0.0 || t == 0.0 {
            continue;
        }
        let (sin, cos) = (t * ac[k]).sin_cos();
        out.u[k] = j.rotate(w.u[k], cos, sin);
        out.v[k] = j.rotate(w.v[k], cos, -sin);
    }
    out
}
