//! Concrete instances: cubic Klein–Gordon on the 1-d torus, the rotating toy
//! ODE and the free (`f ≡ 0`) problem.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::calculus::{ComplexStructure, SpectralBasis};
use crate::error::{Error, Result};
use crate::integrator::{Nonlinearity, ZeroNonlinearity};

/// Problem description as it appears in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// `c⁻²φ̈ − ∂_xxφ + c²φ = |φ|²φ` on the torus `[0, 2π)`.
    Kg {
        n_modes: usize,
        #[serde(default)]
        initial: TorusInitial,
    },
    /// `q̇ = p`, `ṗ/(2c²) = Jp − ∇V(q)` in `ℝ^{2d}`.
    Ode {
        d: usize,
        #[serde(default)]
        potential: Potential,
        q0: Vec<f64>,
        p0: Vec<f64>,
    },
    /// Linear Klein–Gordon on the torus (`f ≡ 0`).
    Free {
        n_modes: usize,
        #[serde(default)]
        initial: TorusInitial,
    },
}

/// Real initial data on the torus: `φ₀(x) = a·exp(−(1 − cos x)/w²)`,
/// `φ₀′(x) = v·sin x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TorusInitial {
    pub amplitude: f64,
    pub width: f64,
    pub velocity: f64,
}

impl Default for TorusInitial {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            width: 1.0,
            velocity: 0.5,
        }
    }
}

/// Radial polynomial potential `V(q) = Σ_k a_k |q|^{2k} / (2k)`, with
/// `coefficients[k − 1] = a_k`.
///
/// Rotation invariance makes `e^{−c²tJ}∇V(e^{c²tJ}φ)` independent of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Potential {
    Radial { coefficients: Vec<f64> },
}

impl Default for Potential {
    /// `V(q) = ¼|q|⁴`.
    fn default() -> Self {
        Potential::Radial {
            coefficients: vec![0.0, 1.0],
        }
    }
}

impl Potential {
    pub fn quadratic() -> Self {
        Potential::Radial {
            coefficients: vec![1.0],
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let r2: f64 = q.iter().map(|x| x * x).sum();
        match self {
            Potential::Radial { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let k = (i + 1) as i32;
                    a * r2.powi(k) / (2 * k) as f64
                })
                .sum(),
        }
    }

    /// `∇V(q)` on packed coordinates `q_k + i q_{k+d}`.
    pub fn gradient(&self, q: &[Complex64]) -> Vec<Complex64> {
        let r2: f64 = q.iter().map(|z| z.norm_sqr()).sum();
        match self {
            Potential::Radial { coefficients } => {
                // Σ_k a_k |q|^{2k−2}
                let factor: f64 = coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, a)| a * r2.powi(i as i32))
                    .sum();
                q.iter().map(|z| z * factor).collect()
            }
        }
    }
}

/// `f(φ) = |φ|²φ` evaluated pseudo-spectrally with 2/3-rule dealiasing.
///
/// Coefficients are stored in FFT order: index `j` holds wavenumber `j` for
/// `j < n/2` and `j − n` otherwise, so `φ(x) = Σ_k φ̂_k e^{ikx}`.
pub struct KgNonlinearity {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl KgNonlinearity {
    pub fn new(n_modes: usize) -> Result<Self> {
        check_modes(n_modes)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n: n_modes,
            forward: planner.plan_fft_forward(n_modes),
            inverse: planner.plan_fft_inverse(n_modes),
        })
    }

    fn dealias(&self, coeffs: &mut [Complex64]) {
        let n = self.n as i64;
        for (j, z) in coeffs.iter_mut().enumerate() {
            if 3 * wavenumber(j, self.n).abs() > n {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
}

impl fmt::Debug for KgNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KgNonlinearity")
            .field("n", &self.n)
            .finish()
    }
}

impl Nonlinearity for KgNonlinearity {
    fn eval(&self, phi: &[Complex64], _t: f64) -> Result<Vec<Complex64>> {
        kg_nonlinearity_with(self, phi)
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn description(&self) -> String {
        format!("cubic |φ|²φ on {} Fourier modes", self.n)
    }
}

fn kg_nonlinearity_with(plan: &KgNonlinearity, phi_hat: &[Complex64]) -> Result<Vec<Complex64>> {
    if phi_hat.len() != plan.n {
        return Err(Error::DimensionMismatch {
            expected: plan.n,
            found: phi_hat.len(),
        });
    }
    let mut buf = phi_hat.to_vec();
    plan.inverse.process(&mut buf);
    for z in buf.iter_mut() {
        *z *= z.norm_sqr();
    }
    plan.forward.process(&mut buf);
    let scale = 1.0 / plan.n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    plan.dealias(&mut buf);
    Ok(buf)
}

/// `|φ|²φ` on Fourier coefficients (one-shot; plans the transforms each call).
pub fn kg_nonlinearity(phi_hat: &[Complex64], _t: f64) -> Result<Vec<Complex64>> {
    let plan = KgNonlinearity::new(phi_hat.len())?;
    kg_nonlinearity_with(&plan, phi_hat)
}

/// `f(φ, t) = −2 e^{−c²tJ} ∇V(e^{c²tJ} φ)` for the toy ODE.
#[derive(Debug, Clone)]
pub struct OdeNonlinearity {
    pub potential: Potential,
    pub c: f64,
}

impl Nonlinearity for OdeNonlinearity {
    fn eval(&self, phi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        Ok(ode_nonlinearity(phi, t, self.c, &self.potential))
    }

    fn is_autonomous(&self) -> bool {
        matches!(self.potential, Potential::Radial { .. })
    }

    fn description(&self) -> String {
        format!("rotating toy ODE with {:?}", self.potential)
    }
}

pub fn ode_nonlinearity(
    phi: &[Complex64],
    t: f64,
    c: f64,
    potential: &Potential,
) -> Vec<Complex64> {
    let j = ComplexStructure::CanonicalSymplectic;
    let (sin, cos) = (c * c * t).sin_cos();
    let q: Vec<Complex64> = phi.iter().map(|&z| j.rotate(z, cos, sin)).collect();
    potential
        .gradient(&q)
        .into_iter()
        .map(|g| -2.0 * j.rotate(g, cos, -sin))
        .collect()
}

/// A problem assembled for a fixed `c`: eigenbasis, nonlinearity and initial data.
pub struct Problem {
    spec: ProblemSpec,
    c: f64,
    basis: SpectralBasis,
    nl: Box<dyn Nonlinearity>,
    phi0: Vec<Complex64>,
    phi0_prime: Vec<Complex64>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("spec", &self.spec)
            .field("c", &self.c)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn nonlinearity(&self) -> &dyn Nonlinearity {
        self.nl.as_ref()
    }

    pub fn phi0(&self) -> &[Complex64] {
        &self.phi0
    }

    pub fn phi0_prime(&self) -> &[Complex64] {
        &self.phi0_prime
    }
}

/// Builds the problem described by `spec` for wave speed `c`.
///
/// The toy ODE's initial data depend on `c`: with `φ = e^{−c²tJ}q`,
/// `φ₀ = q₀` and `φ₀′ = p₀ − c²Jq₀`.
pub fn build_problem(spec: &ProblemSpec, c: f64) -> Result<Problem> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c must be positive, got {c}"
        )));
    }
    let (basis, nl, phi0, phi0_prime): (_, Box<dyn Nonlinearity>, _, _) = match spec {
        ProblemSpec::Kg { n_modes, initial } => {
            let (phi0, phi0_prime) = torus_initial(*n_modes, initial)?;
            (
                torus_basis(*n_modes)?,
                Box::new(KgNonlinearity::new(*n_modes)?),
                phi0,
                phi0_prime,
            )
        }
        ProblemSpec::Free { n_modes, initial } => {
            let (phi0, phi0_prime) = torus_initial(*n_modes, initial)?;
            (
                torus_basis(*n_modes)?,
                Box::new(ZeroNonlinearity),
                phi0,
                phi0_prime,
            )
        }
        ProblemSpec::Ode {
            d,
            potential,
            q0,
            p0,
        } => {
            if *d == 0 {
                return Err(Error::InvalidParameter(
                    "ODE half-dimension d must be ≥ 1".into(),
                ));
            }
            for (name, v) in [("q0", q0), ("p0", p0)] {
                if v.len() != 2 * d {
                    return Err(Error::InvalidParameter(format!(
                        "{name} must have 2d = {} entries, got {}",
                        2 * d,
                        v.len()
                    )));
                }
            }
            let Potential::Radial { coefficients } = potential;
            if coefficients.is_empty() || coefficients.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidParameter(
                    "potential needs finite coefficients".into(),
                ));
            }
            let j = ComplexStructure::CanonicalSymplectic;
            let q = pack(q0, *d);
            let p = pack(p0, *d);
            let phi0_prime = q
                .iter()
                .zip(&p)
                .map(|(&qk, &pk)| pk - j.apply(qk) * (c * c))
                .collect();
            (
                SpectralBasis::zero(*d, j),
                Box::new(OdeNonlinearity {
                    potential: potential.clone(),
                    c,
                }),
                q,
                phi0_prime,
            )
        }
    };
    Ok(Problem {
        spec: spec.clone(),
        c,
        basis,
        nl,
        phi0,
        phi0_prime,
    })
}

/// `(x_1..x_d, x_{d+1}..x_{2d}) ↦ (x_k + i x_{k+d})_k`.
pub fn pack(x: &[f64], d: usize) -> Vec<Complex64> {
    (0..d).map(|k| Complex64::new(x[k], x[k + d])).collect()
}

pub fn unpack(z: &[Complex64]) -> Vec<f64> {
    z.iter()
        .map(|c| c.re)
        .chain(z.iter().map(|c| c.im))
        .collect()
}

fn check_modes(n_modes: usize) -> Result<()> {
    if n_modes == 0 || n_modes % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "n_modes must be even and positive, got {n_modes}"
        )));
    }
    Ok(())
}

/// Wavenumber held at FFT index `j`.
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// `λ_k = k²` (the non-negative operator `−∂_xx`) in FFT order.
pub fn torus_basis(n_modes: usize) -> Result<SpectralBasis> {
    check_modes(n_modes)?;
    let eig = (0..n_modes)
        .map(|j| (wavenumber(j, n_modes) as f64).powi(2))
        .collect();
    SpectralBasis::new(eig, ComplexStructure::ImaginaryUnit)
}

/// Grid `x_j = 2πj/n`.
pub fn torus_grid(n_modes: usize) -> Vec<f64> {
    (0..n_modes)
        .map(|j| 2.0 * PI * j as f64 / n_modes as f64)
        .collect()
}

/// Fourier coefficients `φ̂_k = (1/n) Σ_j φ(x_j) e^{−ikx_j}`.
pub fn to_coefficients(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter_mut().for_each(|z| *z /= n as f64);
    buf
}

/// Grid values `φ(x_j) = Σ_k φ̂_k e^{ikx_j}`.
pub fn to_grid(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    FftPlanner::new()
        .plan_fft_inverse(coeffs.len())
        .process(&mut buf);
    buf
}

fn torus_initial(n_modes: usize, init: &TorusInitial) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    check_modes(n_modes)?;
    if !(init.width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bump width must be positive, got {}",
            init.width
        )));
    }
    let grid = torus_grid(n_modes);
    let phi: Vec<Complex64> = grid
        .iter()
        .map(|&x| {
            Complex64::new(
                init.amplitude * (-(1.0 - x.cos()) / init.width.powi(2)).exp(),
                0.0,
            )
        })
        .collect();
    let dphi: Vec<Complex64> = grid
        .iter()
        .map(|&x| Complex64::new(init.velocity * x.sin(), 0.0))
        .collect();
    Ok((to_coefficients(&phi), to_coefficients(&dphi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kg_zero_and_constant() {
        let out = kg_nonlinearity(&vec![c64(0.0, 0.0); 16], 0.0).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
        let mut phi = vec![c64(0.0, 0.0); 16];
        phi[0] = c64(0.7, 0.0);
        let out = kg_nonlinearity(&phi, 0.0).unwrap();
        assert!((out[0] - c64(0.343, 0.0)).norm() < 1e-15);
        assert!(out[1..].iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn kg_plane_wave_against_pointwise_oracle() {
        let n = 32;
        let mut phi = vec![c64(0.0, 0.0); n];
        phi[1] = c64(1.0, 0.0);
        let out = kg_nonlinearity(&phi, 0.0).unwrap();
        // pointwise oracle: evaluate e^{ix} on the grid, cube, project by a direct DFT
        let grid = torus_grid(n);
        let values: Vec<Complex64> = grid
            .iter()
            .map(|&x| {
                let z = Complex64::cis(x);
                z * z.norm_sqr()
            })
            .collect();
        for j in 0..n {
            let k = wavenumber(j, n) as f64;
            let direct: Complex64 = grid
                .iter()
                .zip(&values)
                .map(|(&x, v)| v * Complex64::cis(-k * x))
                .sum::<Complex64>()
                / n as f64;
            assert!((out[j] - direct).norm() < 1e-14, "j={j}");
        }
        assert!((out[1] - c64(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn kg_dealiasing_drops_top_third() {
        let n = 32;
        let mut phi = vec![c64(0.0, 0.0); n];
        phi[4] = c64(1.0, 0.0);
        phi[n - 4] = c64(0.5, 0.0);
        let out = kg_nonlinearity(&phi, 0.0).unwrap();
        for (j, z) in out.iter().enumerate() {
            if 3 * wavenumber(j, n).abs() > n as i64 {
                assert_eq!(*z, c64(0.0, 0.0));
            }
        }
        // wavenumber 12 would be produced by 4 + 4 + 4 but lies above n/3
        assert!(out[12].norm() == 0.0);
        assert!(out[4].norm() > 0.1);
    }

    #[test]
    fn kg_rejects_odd_sizes() {
        assert!(kg_nonlinearity(&vec![c64(0.0, 0.0); 7], 0.0).is_err());
        let plan = KgNonlinearity::new(8).unwrap();
        assert!(plan.eval(&vec![c64(0.0, 0.0); 4], 0.0).is_err());
    }

    #[test]
    fn ode_examples() {
        let zero = Potential::Radial {
            coefficients: vec![0.0],
        };
        let phi = vec![c64(0.3, -0.2)];
        assert_eq!(
            ode_nonlinearity(&phi, 1.3, 10.0, &zero),
            vec![c64(0.0, 0.0)]
        );

        let quad = Potential::quadratic();
        let out = ode_nonlinearity(&phi, 0.77, 10.0, &quad);
        assert!((out[0] + 2.0 * phi[0]).norm() < 1e-14);

        let quartic = Potential::default();
        let out = ode_nonlinearity(&[c64(1.0, 0.0)], 0.0, 10.0, &quartic);
        assert_eq!(out, vec![c64(-2.0, 0.0)]);
    }

    #[test]
    fn radial_gradient_matches_finite_differences() {
        let v = Potential::Radial {
            coefficients: vec![0.5, -0.3, 0.2],
        };
        let q = [0.4, -0.7, 1.1, 0.2];
        let grad = unpack(&v.gradient(&pack(&q, 2)));
        let h = 1e-6;
        for i in 0..4 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += h;
            qm[i] -= h;
            let fd = (v.value(&qp) - v.value(&qm)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() < 1e-8,
                "i={i} fd={fd} grad={}",
                grad[i]
            );
        }
    }

    #[test]
    fn radial_potential_is_rotation_equivariant() {
        let v = Potential::default();
        let phi = vec![c64(0.3, -0.9), c64(1.2, 0.4)];
        let a = ode_nonlinearity(&phi, 0.0, 3.0, &v);
        for &t in &[0.1, 1.7, 12.3] {
            let b = ode_nonlinearity(&phi, t, 3.0, &v);
            for k in 0..2 {
                assert!((a[k] - b[k]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn build_problem_kinds() {
        let ode = ProblemSpec::Ode {
            d: 1,
            potential: Potential::default(),
            q0: vec![1.0, 0.0],
            p0: vec![0.0, 1.0],
        };
        let p = build_problem(&ode, 10.0).unwrap();
        assert_eq!(p.basis().len(), 1);
        assert_eq!(p.basis().structure(), ComplexStructure::CanonicalSymplectic);
        assert_eq!(p.phi0(), &[c64(1.0, 0.0)]);
        // φ₀′ = p₀ − c²Jq₀ with J(1, 0) = (0, −1)
        assert_eq!(p.phi0_prime(), &[c64(0.0, 1.0 + 100.0)]);
        assert!(p.nonlinearity().is_autonomous());

        let kg = ProblemSpec::Kg {
            n_modes: 32,
            initial: TorusInitial::default(),
        };
        let p = build_problem(&kg, 50.0).unwrap();
        assert_eq!(p.basis().len(), 32);
        assert_eq!(p.basis().eigenvalues()[31], 1.0);
        assert_eq!(p.basis().eigenvalues()[16], 256.0);

        let free = ProblemSpec::Free {
            n_modes: 8,
            initial: TorusInitial::default(),
        };
        let p = build_problem(&free, 5.0).unwrap();
        let out = p.nonlinearity().eval(p.phi0(), 0.0).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn build_problem_rejects_bad_specs() {
        let bad = ProblemSpec::Ode {
            d: 2,
            potential: Potential::default(),
            q0: vec![1.0, 0.0],
            p0: vec![0.0, 1.0, 0.0, 0.0],
        };
        assert!(build_problem(&bad, 10.0).is_err());
        let odd = ProblemSpec::Kg {
            n_modes: 15,
            initial: TorusInitial::default(),
        };
        assert!(build_problem(&odd, 10.0).is_err());
        let ok = ProblemSpec::Free {
            n_modes: 8,
            initial: TorusInitial::default(),
        };
        assert!(build_problem(&ok, 0.0).is_err());
    }

    #[test]
    fn spec_json_uses_kind_tag() {
        let text = r#"{"kind": "ode", "d": 1, "q0": [1.0, 0.0], "p0": [0.0, 1.0]}"#;
        let spec: ProblemSpec = serde_json::from_str(text).unwrap();
        assert_eq!(
            spec,
            ProblemSpec::Ode {
                d: 1,
                potential: Potential::default(),
                q0: vec![1.0, 0.0],
                p0: vec![0.0, 1.0]
            }
        );
        let kg: ProblemSpec = serde_json::from_str(r#"{"kind": "kg", "n_modes": 32}"#).unwrap();
        assert!(matches!(kg, ProblemSpec::Kg { n_modes: 32, .. }));
        assert!(serde_json::from_str::<ProblemSpec>(r#"{"kind": "heat"}"#).is_err());
    }

    #[test]
    fn torus_initial_is_real_and_smooth() {
        let (phi, dphi) = torus_initial(32, &TorusInitial::default()).unwrap();
        for j in 1..16 {
            let k = 32 - j;
            assert!((phi[j] - phi[k].conj()).norm() < 1e-15);
            assert!((dphi[j] - dphi[k].conj()).norm() < 1e-15);
        }
        assert!(phi[15].norm() < 1e-12);
        let back = to_grid(&phi);
        assert!(back.iter().all(|z| z.im.abs() < 1e-15));
    }
}
