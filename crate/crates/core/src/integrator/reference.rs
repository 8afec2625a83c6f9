//! High-accuracy oracles: the pre-schemes `Φ_l` evaluated with fine
//! quadrature, and a collocation solver for the twisted system.

use std::f64::consts::PI;

use serde::Serialize;

use super::scheme::Base;
use super::{cal_f_unchecked, Nonlinearity, SchemeParams};
use crate::calculus::{rotate_fast_with, semigroup_with, SpectralBasis, StateVector, Symbols};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Gauss nodes and weights on `[0, 1]` with the integration matrix
/// `S_ij = ∫_0^{x_i} ℓ_j(x) dx` of the Lagrange basis on those nodes.
struct Collocation {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    matrix: Vec<Vec<f64>>,
}

impl Collocation {
    fn new(n: usize) -> Result<Self> {
        let rule = gauss_legendre(n)?;
        let nodes: Vec<f64> = rule.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let weights: Vec<f64> = rule.weights.iter().map(|w| 0.5 * w).collect();
        let lagrange = |j: usize, x: f64| -> f64 {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| (x - xk) / (nodes[j] - xk))
                .product()
        };
        // n-point Gauss on [0, x_i] is exact for the degree n − 1 basis
        let matrix = nodes
            .iter()
            .map(|&xi| {
                (0..n)
                    .map(|j| {
                        nodes
                            .iter()
                            .zip(&weights)
                            .map(|(&y, &wy)| xi * wy * lagrange(j, xi * y))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            nodes,
            weights,
            matrix,
        })
    }
}

/// Result of [`reference_phi`].
#[derive(Debug, Clone, Serialize)]
pub struct PhiReference {
    pub state: StateVector,
    /// False when panel doubling did not reach the tolerance.
    pub converged: bool,
    pub panels: usize,
    pub estimated_error: f64,
}

const PHI_NODES: usize = 16;
const PHI_PANELS_PER_PERIOD: usize = 8;
const PHI_TOL: f64 = 1e-13;
const PHI_MAX_DOUBLINGS: usize = 5;

/// `Φ_l(w, z)` with every Duhamel integral computed by composite Gauss
/// quadrature, refined by panel doubling until two levels agree to `10⁻¹³`.
pub fn reference_phi(
    l: usize,
    w: &StateVector,
    z: f64,
    params: &SchemeParams,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<PhiReference> {
    reference_phi_at(l, w, z, Base::default(), params.c, nl, basis)
}

/// [`reference_phi`] for a step starting at `base`.
pub fn reference_phi_at(
    l: usize,
    w: &StateVector,
    z: f64,
    base: Base,
    c: f64,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<PhiReference> {
    if l == 0 {
        return Err(Error::InvalidParameter("order l must be at least 1".into()));
    }
    if !(z >= 0.0 && z.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "z must be non-negative, got {z}"
        )));
    }
    basis.check_len(w.u.len())?;
    basis.check_len(w.v.len())?;
    let symbols = Symbols::new(basis, c)?;
    let colloc = Collocation::new(PHI_NODES)?;
    let period = 2.0 * PI / (c * c);
    let ctx = PhiContext {
        w,
        base,
        c,
        nl,
        basis,
        symbols: &symbols,
        colloc: &colloc,
    };
    if z == 0.0 {
        return Ok(PhiReference {
            state: w.clone(),
            converged: true,
            panels: 0,
            estimated_error: 0.0,
        });
    }
    let mut panels = ((PHI_PANELS_PER_PERIOD as f64 * z / period).ceil() as usize).max(2);
    let mut coarse = ctx.evaluate(l, z, panels)?;
    let scale = w.norm().max(1.0);
    for _ in 0..PHI_MAX_DOUBLINGS {
        panels *= 2;
        let fine = ctx.evaluate(l, z, panels)?;
        let diff = fine.distance(&coarse);
        if diff <= PHI_TOL * scale {
            return Ok(PhiReference {
                state: fine,
                converged: true,
                panels,
                estimated_error: diff,
            });
        }
        coarse = fine;
        if diff.is_nan() {
            break;
        }
    }
    let panels_used = panels;
    let fine = ctx.evaluate(l, z, panels_used * 2)?;
    let diff = fine.distance(&coarse);
    Ok(PhiReference {
        state: fine,
        converged: diff <= PHI_TOL * scale,
        panels: panels_used * 2,
        estimated_error: diff,
    })
}

struct PhiContext<'a> {
    w: &'a StateVector,
    base: Base,
    c: f64,
    nl: &'a dyn Nonlinearity,
    basis: &'a SpectralBasis,
    symbols: &'a Symbols,
    colloc: &'a Collocation,
}

impl PhiContext<'_> {
    fn semigroup(&self, w: &StateVector, t: f64) -> StateVector {
        semigroup_with(w, t, self.basis.structure(), &self.symbols.ac)
    }

    /// `B_c⁻¹ e^{−(c²r+β)𝒥} ℱ(e^{(c²r+β)𝒥} y, t_b + r)`.
    fn force(&self, y: &StateVector, r: f64) -> Result<StateVector> {
        let j = self.basis.structure();
        let theta = self.c * self.c * r + self.base.phase;
        let f = cal_f_unchecked(
            &rotate_fast_with(y, theta, j),
            self.base.time + r,
            self.nl,
            j,
        )?;
        Ok(rotate_fast_with(&f, -theta, j).weighted(&self.symbols.bc_inv))
    }

    /// `Φ_l(w, z)` on `panels` equal panels.
    fn evaluate(&self, l: usize, z: f64, panels: usize) -> Result<StateVector> {
        let h = z / panels as f64;
        let n = self.colloc.nodes.len();
        let times: Vec<f64> = (0..panels)
            .flat_map(|p| self.colloc.nodes.iter().map(move |&x| (p as f64 + x) * h))
            .collect();
        // Φ_{k}(w, r) at every node, starting from Φ_0 = w (level 1 drops the
        // e^{−r𝒥A_c} factor and adds the integral outside the semigroup)
        let mut values: Vec<StateVector> = vec![self.w.clone(); times.len()];
        let mut result = None;
        for level in 1..=l {
            let integrand: Vec<StateVector> = times
                .iter()
                .zip(&values)
                .map(|(&r, y)| {
                    let g = self.force(y, r)?;
                    Ok(if level == 1 {
                        g
                    } else {
                        self.semigroup(&g, -r)
                    })
                })
                .collect::<Result<_>>()?;
            let mut running = StateVector::zeros(self.w.len());
            let last = level == l;
            let mut next = Vec::with_capacity(if last { 0 } else { times.len() });
            for p in 0..panels {
                let block = &integrand[p * n..(p + 1) * n];
                if !last {
                    for (i, row) in self.colloc.matrix.iter().enumerate() {
                        let mut partial = running.clone();
                        for (g, &s) in block.iter().zip(row) {
                            partial.add_scaled(h * s, g);
                        }
                        next.push(self.assemble(level, &partial, times[p * n + i]));
                    }
                }
                for (g, &b) in block.iter().zip(&self.colloc.weights) {
                    running.add_scaled(h * b, g);
                }
            }
            if last {
                result = Some(self.assemble(level, &running, z));
            } else {
                values = next;
            }
        }
        Ok(result.expect("l ≥ 1"))
    }

    fn assemble(&self, level: usize, integral: &StateVector, r: f64) -> StateVector {
        if level == 1 {
            let mut out = self.semigroup(self.w, r);
            out.add_scaled(1.0, integral);
            out
        } else {
            let mut inner = self.w.clone();
            inner.add_scaled(1.0, integral);
            self.semigroup(&inner, r)
        }
    }
}

/// Gauss–Legendre collocation for the twisted system, used as ground truth.
///
/// The stiff linear part `𝒥A_c` is removed by the integrating factor
/// `y = e^{−t𝒥A_c} w`; the remaining right-hand side oscillates with period
/// `T`, which the fixed step `T / steps_per_period` resolves. Time is tracked
/// as (whole periods, fraction of a period) so the fast phase stays exact
/// over long runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSolver {
    pub stages: usize,
    pub steps_per_period: usize,
}

impl Default for TruthSolver {
    fn default() -> Self {
        Self {
            stages: 5,
            steps_per_period: 50,
        }
    }
}

const FIXED_POINT_MAX_ITER: usize = 80;

impl TruthSolver {
    /// States `w(t)` at each of `times` (sorted, non-negative) from `w(0) = w0`.
    pub fn solve(
        &self,
        w0: &StateVector,
        times: &[f64],
        c: f64,
        nl: &dyn Nonlinearity,
        basis: &SpectralBasis,
    ) -> Result<Vec<StateVector>> {
        if self.stages == 0 || self.steps_per_period == 0 {
            return Err(Error::InvalidParameter(
                "reference solver needs at least one stage and one step per period".into(),
            ));
        }
        if times.windows(2).any(|p| p[1] < p[0]) || times.iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::InvalidParameter(
                "output times must be sorted and non-negative".into(),
            ));
        }
        basis.check_len(w0.u.len())?;
        basis.check_len(w0.v.len())?;
        let symbols = Symbols::new(basis, c)?;
        let colloc = Collocation::new(self.stages)?;
        let period = 2.0 * PI / (c * c);
        let mut run = TruthRun {
            solver: self,
            symbols: &symbols,
            colloc: &colloc,
            basis,
            nl,
            period,
            y: w0.clone(),
            whole: 0,
            frac: 0.0,
            stage_guess: None,
        };
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let (whole, frac) = period_split(t / period);
            run.advance_to(whole, frac)?;
            out.push(run.state());
        }
        Ok(out)
    }
}

fn period_split(x: f64) -> (u64, f64) {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        (nearest as u64, 0.0)
    } else {
        (x.floor() as u64, x - x.floor())
    }
}

struct TruthRun<'a> {
    solver: &'a TruthSolver,
    symbols: &'a Symbols,
    colloc: &'a Collocation,
    basis: &'a SpectralBasis,
    nl: &'a dyn Nonlinearity,
    period: f64,
    y: StateVector,
    whole: u64,
    frac: f64,
    stage_guess: Option<Vec<StateVector>>,
}

impl TruthRun<'_> {
    fn time(&self, whole: u64, frac: f64) -> f64 {
        (whole as f64 + frac) * self.period
    }

    fn state(&self) -> StateVector {
        let t = self.time(self.whole, self.frac);
        semigroup_with(&self.y, t, self.basis.structure(), &self.symbols.ac)
    }

    fn advance_to(&mut self, whole: u64, frac: f64) -> Result<()> {
        while self.whole < whole {
            self.advance_within(1.0)?;
            self.whole += 1;
            self.frac = 0.0;
        }
        if frac > self.frac {
            self.advance_within(frac)?;
        }
        Ok(())
    }

    /// Integrates from the current fraction of the period to `target`.
    fn advance_within(&mut self, target: f64) -> Result<()> {
        let span = target - self.frac;
        if span <= 0.0 {
            return Ok(());
        }
        let n = ((span * self.solver.steps_per_period as f64).ceil() as usize).max(1);
        let d = span / n as f64;
        let start = self.frac;
        for k in 0..n {
            let a = start + k as f64 * d;
            self.substep(a, d)?;
        }
        self.frac = target;
        Ok(())
    }

    /// `e^{−t𝒥A_c} B_c⁻¹ e^{−θ𝒥} ℱ(e^{θ𝒥} e^{t𝒥A_c} y, t)` at fraction `frac`
    /// of the current period, written into `out`.
    fn rhs(&self, y: &StateVector, frac: f64, out: &mut StateVector) -> Result<()> {
        let j = self.basis.structure();
        let t = self.time(self.whole, frac);
        let (sin_f, cos_f) = (2.0 * PI * frac).sin_cos();
        let ac = &self.symbols.ac;
        // per mode: e^{θJ}e^{t a_k J} on u, e^{−θJ}e^{−t a_k J} on v
        let rot: Vec<(f64, f64)> = ac
            .iter()
            .map(|&a| {
                let (s, c) = (t * a).sin_cos();
                (c * cos_f - s * sin_f, s * cos_f + c * sin_f)
            })
            .collect();
        let phi: Vec<_> =
            y.u.iter()
                .zip(&y.v)
                .zip(&rot)
                .map(|((&u, &v), &(c, s))| 0.5 * (j.rotate(u, c, s) + j.rotate(v, c, -s)))
                .collect();
        let g = self.nl.eval(&phi, t)?;
        if g.len() != phi.len() {
            return Err(Error::Nonlinearity(format!(
                "{} returned {} coefficients for a block of {}",
                self.nl.description(),
                g.len(),
                phi.len()
            )));
        }
        for k in 0..g.len() {
            let (c, s) = rot[k];
            let jg = j.apply(g[k]) * self.symbols.bc_inv[k];
            out.u[k] = -j.rotate(jg, c, -s);
            out.v[k] = j.rotate(jg, c, s);
        }
        Ok(())
    }

    fn substep(&mut self, a: f64, d: f64) -> Result<()> {
        let h = d * self.period;
        let colloc = self.colloc;
        let s = colloc.nodes.len();
        let n = self.y.len();
        let stage_fracs: Vec<f64> = colloc.nodes.iter().map(|x| a + x * d).collect();
        let mut k: Vec<StateVector> = match self.stage_guess.take() {
            Some(k) => k,
            None => {
                let mut k = vec![StateVector::zeros(n); s];
                for (ki, &f) in k.iter_mut().zip(&stage_fracs) {
                    self.rhs(&self.y, f, ki)?;
                }
                k
            }
        };
        let scale = k.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        let mut next = vec![StateVector::zeros(n); s];
        let mut stage = StateVector::zeros(n);
        let mut previous = f64::INFINITY;
        let mut converged = false;
        for iter in 0..FIXED_POINT_MAX_ITER {
            let mut delta: f64 = 0.0;
            for i in 0..s {
                stage.u.copy_from_slice(&self.y.u);
                stage.v.copy_from_slice(&self.y.v);
                for (kj, &aij) in k.iter().zip(&colloc.matrix[i]) {
                    stage.add_scaled(h * aij, kj);
                }
                self.rhs(&stage, stage_fracs[i], &mut next[i])?;
                delta = delta.max(k[i].distance(&next[i]));
            }
            std::mem::swap(&mut k, &mut next);
            if delta <= 4.0 * f64::EPSILON * scale {
                converged = true;
                break;
            }
            if iter > 2 && delta >= previous && delta <= 1e-12 * scale {
                // rounding level reached
                converged = true;
                break;
            }
            previous = delta;
        }
        if !converged {
            return Err(Error::RootFinding(format!(
                "collocation iteration did not converge at t = {}",
                self.time(self.whole, a)
            )));
        }
        for (kj, &b) in k.iter().zip(&colloc.weights) {
            self.y.add_scaled(h * b, kj);
        }
        if !self.y.is_finite() {
            return Err(Error::NonFinite { step: 0 });
        }
        self.stage_guess = Some(k);
        Ok(())
    }
}
