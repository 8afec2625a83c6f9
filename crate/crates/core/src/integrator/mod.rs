//! Twisted-variable formulation and the iterated schemes `Ψ_l`.
//!
//! With `U = φ − c⁻²B_c⁻¹Jφ̇`, `V = φ + c⁻²B_c⁻¹Jφ̇` and the twist
//! `w = (e^{−c²tJ}U, e^{c²tJ}V)`, the equation becomes
//!
//! ```text
//! ẇ = 𝒥A_c w + B_c⁻¹ e^{−c²t𝒥} ℱ(e^{c²t𝒥} w, t),   ℱ(W, t) = (−Jg, Jg),  g = f(½(U + V), t)
//! ```
//!
//! whose only fast frequency is `c²`. The schemes integrate the Duhamel form of
//! this system period by period.

mod reference;
mod scheme;

pub use reference::{reference_phi, reference_phi_at, PhiReference, TruthSolver};
pub use scheme::{
    g0_eval, g_upsilon_eval, psi, psi1_autonomous_trapezoid, run, step, step_count, Base, Scheme,
    StepDiagnostics, Trajectory,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{ComplexStructure, SpectralBasis, StateVector, Symbols};
use crate::error::{Error, Result};

/// Parameters of `Ψ_l` with time step `τ = m·T`, `T = 2π/c²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub l: usize,
    /// Gram degree `M`.
    #[serde(rename = "M")]
    pub gram_degree: usize,
    /// Gauss node count `N`.
    #[serde(rename = "N")]
    pub gauss_nodes: usize,
    /// Analyticity parameter of the error model; never used by the algorithm.
    pub gamma: f64,
    pub c: f64,
    pub m: usize,
}

impl SchemeParams {
    /// Order `l` with `M = ⌊(l+1)/2⌋`, `N = 8`, `γ = 0.5`.
    pub fn new(l: usize, c: f64, m: usize) -> Self {
        Self {
            l,
            gram_degree: default_gram_degree(l),
            gauss_nodes: 8,
            gamma: 0.5,
            c,
            m,
        }
    }

    pub fn with_gauss_nodes(mut self, n: usize) -> Self {
        self.gauss_nodes = n;
        self
    }

    pub fn with_gram_degree(mut self, degree: usize) -> Self {
        self.gram_degree = degree;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidParameter("order l must be at least 1".into()));
        }
        if self.gram_degree == 0 {
            return Err(Error::InvalidParameter(
                "Gram degree M must be at least 1".into(),
            ));
        }
        if self.gauss_nodes == 0 {
            return Err(Error::InvalidParameter(
                "Gauss node count N must be at least 1".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "γ must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "c must be positive, got {}",
                self.c
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        Ok(())
    }

    /// Fast period `T = 2π/c²`.
    pub fn period(&self) -> f64 {
        2.0 * PI / (self.c * self.c)
    }

    /// `τ = m·T`.
    pub fn tau(&self) -> f64 {
        self.m as f64 * self.period()
    }

    /// Quadrature floor `γ^{2N}` of the error model.
    pub fn floor_estimate(&self) -> f64 {
        self.gamma.powi(2 * self.gauss_nodes as i32)
    }
}

pub fn default_gram_degree(l: usize) -> usize {
    l.div_ceil(2)
}

/// `z/T = m_z + θ_z` with `m_z = ⌊z/T⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSplit {
    pub m_z: usize,
    pub theta_z: f64,
}

/// Splits `z` into whole fast periods and a fractional remainder.
///
/// Quotients within a few ulps of an integer are snapped to it, so `z = mT`
/// computed in floating point gives `(m, 0)` rather than `(m − 1, 1 − ε)`.
pub fn split_phase(z: f64, period: f64) -> PhaseSplit {
    debug_assert!(z >= 0.0 && period > 0.0);
    let ratio = z / period;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 4.0 * f64::EPSILON * nearest.max(1.0) {
        return PhaseSplit {
            m_z: nearest as usize,
            theta_z: 0.0,
        };
    }
    let m_z = ratio.floor();
    PhaseSplit {
        m_z: m_z as usize,
        theta_z: ratio - m_z,
    }
}

/// The nonlinearity `f(ψ, t)` acting on one block of eigen-coefficients.
pub trait Nonlinearity: Send + Sync {
    fn eval(&self, phi: &[Complex64], t: f64) -> Result<Vec<Complex64>>;

    /// True when `f` does not depend on `t`, so `G_0` is a function of `σ` only.
    fn is_autonomous(&self) -> bool {
        false
    }

    fn description(&self) -> String;
}

/// A [`Nonlinearity`] backed by a closure.
pub struct FnNonlinearity<F> {
    f: F,
    autonomous: bool,
    description: String,
}

impl<F> FnNonlinearity<F>
where
    F: Fn(&[Complex64], f64) -> Vec<Complex64> + Send + Sync,
{
    pub fn new(description: impl Into<String>, autonomous: bool, f: F) -> Self {
        Self {
            f,
            autonomous,
            description: description.into(),
        }
    }
}

impl<F> Nonlinearity for FnNonlinearity<F>
where
    F: Fn(&[Complex64], f64) -> Vec<Complex64> + Send + Sync,
{
    fn eval(&self, phi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        Ok((self.f)(phi, t))
    }

    fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    fn description(&self) -> String {
        self.description.clone()
    }
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNonlinearity;

impl Nonlinearity for ZeroNonlinearity {
    fn eval(&self, phi: &[Complex64], _t: f64) -> Result<Vec<Complex64>> {
        Ok(vec![Complex64::new(0.0, 0.0); phi.len()])
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn description(&self) -> String {
        "zero".into()
    }
}

/// `ℱ(W, t) = (−Jg, Jg)` with `g = f(½(U + V), t)`.
pub fn cal_f(
    w: &StateVector,
    t: f64,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    basis.check_len(w.u.len())?;
    basis.check_len(w.v.len())?;
    cal_f_unchecked(w, t, nl, basis.structure())
}

pub(crate) fn cal_f_unchecked(
    w: &StateVector,
    t: f64,
    nl: &dyn Nonlinearity,
    j: ComplexStructure,
) -> Result<StateVector> {
    let phi: Vec<Complex64> = w.u.iter().zip(&w.v).map(|(a, b)| 0.5 * (a + b)).collect();
    let g = nl.eval(&phi, t)?;
    if g.len() != phi.len() {
        return Err(Error::Nonlinearity(format!(
            "{} returned {} coefficients for a block of {}",
            nl.description(),
            g.len(),
            phi.len()
        )));
    }
    let jg: Vec<Complex64> = g.iter().map(|&z| j.apply(z)).collect();
    Ok(StateVector {
        u: jg.iter().map(|z| -z).collect(),
        v: jg,
    })
}

/// `w₀ = (φ₀ − c⁻²B_c⁻¹Jφ₀′, φ₀ + c⁻²B_c⁻¹Jφ₀′)`.
pub fn initial_twist(
    phi0: &[Complex64],
    phi0_prime: &[Complex64],
    c: f64,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    basis.check_len(phi0.len())?;
    basis.check_len(phi0_prime.len())?;
    let symbols = Symbols::new(basis, c)?;
    let j = basis.structure();
    let c2 = c * c;
    let shift: Vec<Complex64> = phi0_prime
        .iter()
        .zip(&symbols.bc_inv)
        .map(|(&p, &b)| j.apply(p) * (b / c2))
        .collect();
    Ok(StateVector {
        u: phi0.iter().zip(&shift).map(|(p, s)| p - s).collect(),
        v: phi0.iter().zip(&shift).map(|(p, s)| p + s).collect(),
    })
}

/// `φ = ½(u + v)`, valid at times that are whole multiples of `T`.
pub fn untwist(w: &StateVector) -> Vec<Complex64> {
    w.u.iter().zip(&w.v).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// `φ(t) = ½(e^{c²tJ}u + e^{−c²tJ}v)` at an arbitrary time `t`.
pub fn untwist_at(
    w: &StateVector,
    t: f64,
    c: f64,
    basis: &SpectralBasis,
) -> Result<Vec<Complex64>> {
    let rotated = crate::calculus::rotate_fast(w, c * c * t, basis)?;
    Ok(untwist(&rotated))
}

/// `φ̇(t)` recovered from the twisted state: `Jφ̇ = ½c²B_c(V − U)`.
pub fn velocity_at(
    w: &StateVector,
    t: f64,
    c: f64,
    basis: &SpectralBasis,
) -> Result<Vec<Complex64>> {
    let rotated = crate::calculus::rotate_fast(w, c * c * t, basis)?;
    let symbols = Symbols::new(basis, c)?;
    let j = basis.structure();
    Ok(rotated
        .u
        .iter()
        .zip(&rotated.v)
        .zip(&symbols.bc_inv)
        .map(|((u, v), b)| {
            // φ̇ = −J · ½c²B_c(V − U) since J⁻¹ = −J
            -j.apply((v - u) * (0.5 * c * c / b))
        })
        .collect())
}
