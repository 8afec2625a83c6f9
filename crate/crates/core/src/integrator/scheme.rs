use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::{initial_twist, split_phase, untwist, Nonlinearity, PhaseSplit, SchemeParams};
use crate::calculus::{semigroup_with, SpectralBasis, StateVector, Symbols};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::quadrature::{gauss_legendre, gram_rule, trapezoid_rule, QuadratureRule};

/// Where a local step starts: absolute time `t_b` and fast phase `β = c²t_b mod 2π`.
///
/// Steps of the time stepper start at multiples of `T`, so `β = 0` there. A
/// nonzero phase lets `Ψ_l` be chained over arbitrary step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Base {
    pub time: f64,
    pub phase: f64,
}

impl Base {
    pub fn at(time: f64, c: f64) -> Self {
        Self {
            time,
            phase: (c * c * time).rem_euclid(2.0 * PI),
        }
    }
}

/// Per-step counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StepDiagnostics {
    pub f_evals: usize,
    pub max_depth: usize,
}

/// Precomputed rules and symbols for evaluating `Ψ_l` with fixed parameters.
pub struct Scheme<'a> {
    params: SchemeParams,
    basis: &'a SpectralBasis,
    nl: &'a dyn Nonlinearity,
    symbols: Symbols,
    period: f64,
    gauss: QuadratureRule,
    /// Gauss nodes mapped to `[0, 1]`.
    sigma: Vec<f64>,
    /// Gram rules indexed by the number of periods `m_z > M`.
    gram: RefCell<HashMap<usize, QuadratureRule>>,
}

impl<'a> Scheme<'a> {
    pub fn new(
        params: SchemeParams,
        nl: &'a dyn Nonlinearity,
        basis: &'a SpectralBasis,
    ) -> Result<Self> {
        params.validate()?;
        let symbols = Symbols::new(basis, params.c)?;
        let gauss = gauss_legendre(params.gauss_nodes)?;
        let sigma = gauss.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
        let mut gram = HashMap::new();
        for m in params.gram_degree + 1..=params.m {
            gram.insert(m, gram_rule(params.gram_degree, m)?);
        }
        Ok(Self {
            params,
            basis,
            nl,
            symbols,
            period: params.period(),
            gauss,
            sigma,
            gram: RefCell::new(gram),
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    /// `Ψ_l(w, z)` for a step starting at `base`.
    pub fn psi_at(
        &self,
        l: usize,
        w: &StateVector,
        z: f64,
        base: Base,
    ) -> Result<(StateVector, StepDiagnostics)> {
        if l == 0 {
            return Err(Error::InvalidParameter("order l must be at least 1".into()));
        }
        if !(z >= 0.0 && z.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "z must be non-negative, got {z}"
            )));
        }
        self.check_state(w)?;
        let ctx = StepContext::new(self, w, base);
        let split = split_phase(z, self.period);
        let out = ctx.psi_level(l, z, split, 1)?;
        Ok((out, ctx.diagnostics()))
    }

    /// One step `w_{n+1} = Ψ_l(w_n, τ)` starting at `t_n`.
    pub fn step_at(&self, w: &StateVector, t_n: f64) -> Result<(StateVector, StepDiagnostics)> {
        self.check_state(w)?;
        let ctx = StepContext::new(
            self,
            w,
            Base {
                time: t_n,
                phase: 0.0,
            },
        );
        // top level: z = mT exactly, no fractional tail
        let split = PhaseSplit {
            m_z: self.params.m,
            theta_z: 0.0,
        };
        let out = ctx.psi_level(self.params.l, self.params.tau(), split, 1)?;
        Ok((out, ctx.diagnostics()))
    }

    fn check_state(&self, w: &StateVector) -> Result<()> {
        self.basis.check_len(w.u.len())?;
        self.basis.check_len(w.v.len())
    }

    fn gram(&self, m_z: usize) -> Result<QuadratureRule> {
        if let Some(rule) = self.gram.borrow().get(&m_z) {
            return Ok(rule.clone());
        }
        let rule = gram_rule(self.params.gram_degree, m_z)?;
        self.gram.borrow_mut().insert(m_z, rule.clone());
        Ok(rule)
    }

    fn semigroup(&self, w: &StateVector, t: f64) -> StateVector {
        semigroup_with(w, t, self.basis.structure(), &self.symbols.ac)
    }

    /// `B_c⁻¹ e^{−θ𝒥} ℱ(e^{θ𝒥} y, t)` with `θ = 2πσ + β`.
    fn twisted_force(
        &self,
        y: &StateVector,
        sigma: f64,
        base: Base,
        t: f64,
    ) -> Result<StateVector> {
        let j = self.basis.structure();
        let (sin, cos) = (2.0 * PI * sigma + base.phase).sin_cos();
        let phi: Vec<Complex64> =
            y.u.iter()
                .zip(&y.v)
                .map(|(&u, &v)| 0.5 * (j.rotate(u, cos, sin) + j.rotate(v, cos, -sin)))
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
        // ℱ = (−Jg, Jg), then e^{−θ𝒥} and B_c⁻¹ mode by mode
        let mut out = StateVector {
            u: Vec::with_capacity(g.len()),
            v: Vec::with_capacity(g.len()),
        };
        for (gk, &b) in g.iter().zip(&self.symbols.bc_inv) {
            let jg = j.apply(*gk) * b;
            out.u.push(-j.rotate(jg, cos, -sin));
            out.v.push(j.rotate(jg, cos, sin));
        }
        Ok(out)
    }
}

/// Memo tables and counters local to one evaluation of `Ψ_l(w, ·)`.
struct StepContext<'s, 'a> {
    scheme: &'s Scheme<'a>,
    w: &'s StateVector,
    base: Base,
    inner: RefCell<HashMap<(usize, u64), StateVector>>,
    g0: RefCell<HashMap<(u64, usize), StateVector>>,
    f_evals: Cell<usize>,
    max_depth: Cell<usize>,
}

impl<'s, 'a> StepContext<'s, 'a> {
    fn new(scheme: &'s Scheme<'a>, w: &'s StateVector, base: Base) -> Self {
        Self {
            scheme,
            w,
            base,
            inner: RefCell::new(HashMap::new()),
            g0: RefCell::new(HashMap::new()),
            f_evals: Cell::new(0),
            max_depth: Cell::new(0),
        }
    }

    fn diagnostics(&self) -> StepDiagnostics {
        StepDiagnostics {
            f_evals: self.f_evals.get(),
            max_depth: self.max_depth.get(),
        }
    }

    fn psi_level(
        &self,
        level: usize,
        z: f64,
        split: PhaseSplit,
        depth: usize,
    ) -> Result<StateVector> {
        self.max_depth.set(self.max_depth.get().max(depth));
        let acc = self.quadrature_sum(level, split, depth)?;
        let s = self.scheme;
        Ok(match acc {
            None => s.semigroup(self.w, z),
            Some(acc) if level == 1 => {
                let mut out = s.semigroup(self.w, z);
                out.add_scaled(1.0, &acc);
                out
            }
            Some(mut acc) => {
                acc.add_scaled(1.0, self.w);
                s.semigroup(&acc, z)
            }
        })
    }

    /// Integer-period part plus fractional tail of the Duhamel integral.
    fn quadrature_sum(
        &self,
        level: usize,
        split: PhaseSplit,
        depth: usize,
    ) -> Result<Option<StateVector>> {
        let s = self.scheme;
        let period = s.period;
        let degree = s.params.gram_degree;
        let weights = &s.gauss.weights;
        let mut acc: Option<StateVector> = None;
        let add = |acc: &mut Option<StateVector>, weight: f64, value: StateVector| match acc {
            Some(a) => a.add_scaled(weight, &value),
            None => {
                let mut v = value;
                v.scale(weight);
                *acc = Some(v);
            }
        };

        let m_z = split.m_z;
        if m_z > degree {
            // Gram rule over the period start points 0, T, …, (m_z − 1)T
            let gram = s.gram(m_z)?;
            let half_span = 0.5 * (m_z - 1) as f64 * period;
            let prefactor = m_z as f64 * period / 4.0;
            for (&xi, &wi) in gram.nodes.iter().zip(&gram.weights) {
                let rho = half_span * (xi + 1.0);
                for (k, (&sigma, &wk)) in s.sigma.iter().zip(weights).enumerate() {
                    let g = self.integrand(level, rho, sigma, Some(k), depth)?;
                    add(&mut acc, prefactor * wi * wk, g);
                }
            }
        } else if m_z > 0 {
            // too few periods to compress: sum the per-period integrals directly
            for j in 0..m_z {
                let rho = j as f64 * period;
                for (k, (&sigma, &wk)) in s.sigma.iter().zip(weights).enumerate() {
                    let g = self.integrand(level, rho, sigma, Some(k), depth)?;
                    add(&mut acc, 0.5 * period * wk, g);
                }
            }
        }
        if split.theta_z > 0.0 {
            let rho = m_z as f64 * period;
            let prefactor = 0.5 * split.theta_z * period;
            for (&sigma, &wk) in s.sigma.iter().zip(weights) {
                let g = self.integrand(level, rho, split.theta_z * sigma, None, depth)?;
                add(&mut acc, prefactor * wk, g);
            }
        }
        Ok(acc)
    }

    /// `node` is the Gauss index when `σ` is one of the shared nodes `σ_k`.
    fn integrand(
        &self,
        level: usize,
        rho: f64,
        sigma: f64,
        node: Option<usize>,
        depth: usize,
    ) -> Result<StateVector> {
        if level == 1 {
            self.g0(rho, sigma, node)
        } else {
            self.g_upsilon(level - 1, rho, sigma, depth)
        }
    }

    /// `G_0(ρ, σ)`. Values at the shared nodes `σ_k` are memoized, by `σ_k`
    /// alone when `f` is autonomous and by `(ρ, σ_k)` otherwise.
    fn g0(&self, rho: f64, sigma: f64, node: Option<usize>) -> Result<StateVector> {
        let s = self.scheme;
        let key = node.map(|k| {
            if s.nl.is_autonomous() {
                (0, k)
            } else {
                (rho.to_bits(), k)
            }
        });
        if let Some(v) = key.and_then(|key| self.g0.borrow().get(&key).cloned()) {
            return Ok(v);
        }
        self.f_evals.set(self.f_evals.get() + 1);
        let t = self.base.time + rho + sigma * s.period;
        let value = s.twisted_force(self.w, sigma, self.base, t)?;
        if let Some(key) = key {
            self.g0.borrow_mut().insert(key, value.clone());
        }
        Ok(value)
    }

    /// `G[Ψ_inner](ρ, σ)`.
    fn g_upsilon(&self, inner: usize, rho: f64, sigma: f64, depth: usize) -> Result<StateVector> {
        let s = self.scheme;
        let local = rho + sigma * s.period;
        let y = self.inner_psi(inner, local, depth + 1)?;
        self.f_evals.set(self.f_evals.get() + 1);
        let force = s.twisted_force(&y, sigma, self.base, self.base.time + local)?;
        Ok(s.semigroup(&force, -local))
    }

    fn inner_psi(&self, level: usize, z: f64, depth: usize) -> Result<StateVector> {
        let key = (level, z.to_bits());
        if let Some(v) = self.inner.borrow().get(&key) {
            return Ok(v.clone());
        }
        let split = split_phase(z, self.scheme.period);
        let value = self.psi_level(level, z, split, depth)?;
        self.inner.borrow_mut().insert(key, value.clone());
        Ok(value)
    }
}

/// `G_0(ρ, σ) = B_c⁻¹ e^{−2πσ𝒥} ℱ(e^{2πσ𝒥} w, ρ + σT)`.
pub fn g0_eval(
    w: &StateVector,
    rho: f64,
    sigma: f64,
    params: &SchemeParams,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    let scheme = Scheme::new(*params, nl, basis)?;
    scheme.check_state(w)?;
    scheme.twisted_force(w, sigma, Base::default(), rho + sigma * scheme.period)
}

/// `G[Υ](ρ, σ) = B_c⁻¹ e^{−(ρ+σT)𝒥A_c} e^{−2πσ𝒥} ℱ(e^{2πσ𝒥} Υ(w, ρ+σT), ρ+σT)`.
pub fn g_upsilon_eval(
    upsilon: &dyn Fn(&StateVector, f64) -> Result<StateVector>,
    w: &StateVector,
    rho: f64,
    sigma: f64,
    params: &SchemeParams,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    let scheme = Scheme::new(*params, nl, basis)?;
    scheme.check_state(w)?;
    let s = rho + sigma * scheme.period;
    let y = upsilon(w, s)?;
    scheme.check_state(&y)?;
    let force = scheme.twisted_force(&y, sigma, Base::default(), s)?;
    Ok(scheme.semigroup(&force, -s))
}

/// `Ψ_l(w, z)` for a step starting at time 0.
pub fn psi(
    l: usize,
    w: &StateVector,
    z: f64,
    params: &SchemeParams,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    let scheme = Scheme::new(*params, nl, basis)?;
    Ok(scheme.psi_at(l, w, z, Base::default())?.0)
}

/// `w_{n+1} = Ψ_l(w_n, τ)` with `l = params.l`, for a step starting at time 0.
pub fn step(
    w: &StateVector,
    params: &SchemeParams,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    let scheme = Scheme::new(*params, nl, basis)?;
    Ok(scheme.step_at(w, 0.0)?.0)
}

/// First-order step `e^{τ𝒥A_c}w + (τ/N) Σ_k G_0(k/N)` with the periodic
/// trapezoid rule, for autonomous `f` and `τ = mT`.
pub fn psi1_autonomous_trapezoid(
    w: &StateVector,
    tau: f64,
    params: &SchemeParams,
    nl: &dyn Nonlinearity,
    basis: &SpectralBasis,
) -> Result<StateVector> {
    if !nl.is_autonomous() {
        return Err(Error::InvalidParameter(format!(
            "trapezoid variant needs an autonomous nonlinearity, {} depends on t",
            nl.description()
        )));
    }
    let scheme = Scheme::new(*params, nl, basis)?;
    scheme.check_state(w)?;
    let split = split_phase(tau, scheme.period);
    if split.theta_z != 0.0 || split.m_z == 0 {
        return Err(Error::InvalidParameter(format!(
            "τ = {tau} is not a positive multiple of T = {}",
            scheme.period
        )));
    }
    let rule = trapezoid_rule(params.gauss_nodes)?;
    let mut out = scheme.semigroup(w, tau);
    for (&x, &weight) in rule.nodes.iter().zip(&rule.weights) {
        let g = scheme.twisted_force(w, x, Base::default(), 0.0)?;
        out.add_scaled(tau * weight, &g);
    }
    Ok(out)
}

/// Output of [`run`].
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub phi: Vec<Vec<Complex64>>,
    pub states: Vec<StateVector>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// `‖w_n‖` exceeded `10⁶ ‖w_0‖`; the run stopped there.
    pub blow_up: bool,
    /// Set when `t_final` is not a whole number of steps.
    pub warning: Option<String>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn final_phi(&self) -> &[Complex64] {
        self.phi.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory holds the initial state")
    }
}

const BLOW_UP_FACTOR: f64 = 1e6;

/// Number of whole steps of size `τ` in `[0, t_final]`.
pub fn step_count(t_final: f64, tau: f64) -> usize {
    let ratio = t_final / tau;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    }
}

/// Iterates the scheme from the problem's initial data up to `t_final`.
pub fn run(problem: &Problem, params: &SchemeParams, t_final: f64) -> Result<Trajectory> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "t_final must be non-negative, got {t_final}"
        )));
    }
    let basis = problem.basis();
    let nl = problem.nonlinearity();
    let scheme = Scheme::new(*params, nl, basis)?;
    let tau = params.tau();
    let n_steps = step_count(t_final, tau);
    let warning = (n_steps as f64 * tau - t_final).abs() > 1e-9 * t_final.max(1.0);
    let warning = warning.then(|| {
        format!(
            "t_final = {t_final} is not a multiple of τ = {tau}; stopping at {}",
            n_steps as f64 * tau
        )
    });

    let mut w = initial_twist(problem.phi0(), problem.phi0_prime(), params.c, basis)?;
    let limit = BLOW_UP_FACTOR * w.norm().max(f64::MIN_POSITIVE);
    let mut traj = Trajectory {
        times: vec![0.0],
        phi: vec![untwist(&w)],
        states: vec![w.clone()],
        diagnostics: Vec::with_capacity(n_steps),
        blow_up: false,
        warning,
    };
    for n in 0..n_steps {
        let (next, diag) = scheme.step_at(&w, n as f64 * tau)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { step: n + 1 });
        }
        w = next;
        traj.times.push((n + 1) as f64 * tau);
        traj.phi.push(untwist(&w));
        traj.states.push(w.clone());
        traj.diagnostics.push(diag);
        if w.norm() > limit {
            traj.blow_up = true;
            break;
        }
    }
    Ok(traj)
}
