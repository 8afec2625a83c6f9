//! Gram polynomials: polynomials orthonormal for the discrete inner product
//! `Σ_{j=0}^{m-1} p(x_j) q(x_j)` on the equidistant grid
//! `x_j = −1 + 2j/(m−1)`, and the Gauss-type rule built on their roots.

use nalgebra::{DMatrix, DVector};

use super::{QuadratureRule, RuleKind};
use crate::error::{Error, Result};

/// `x_j = −1 + 2j/(m−1)` for `j = 0..m`.
pub fn equidistant_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..m)
            .map(|j| -1.0 + 2.0 * j as f64 / (m - 1) as f64)
            .collect(),
    }
}

/// Three-term recurrence of the orthonormal Gram polynomials
/// `x p_j = β_{j+1} p_{j+1} + α_j p_j + β_j p_{j−1}`, `p_0 = 1/√m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPolynomials {
    m: usize,
    alpha: Vec<f64>,
    /// `beta[j]` couples `p_j` and `p_{j−1}`; `beta[0]` is unused.
    beta: Vec<f64>,
}

impl GramPolynomials {
    /// Builds `p_0, ..., p_degree` by discrete Stieltjes orthonormalization.
    pub fn new(degree: usize, m: usize) -> Result<Self> {
        if degree >= m {
            return Err(Error::InvalidParameter(format!(
                "Gram polynomial of degree {degree} needs more than {m} grid points"
            )));
        }
        let grid = equidistant_grid(m);
        let mut alpha = Vec::with_capacity(degree + 1);
        let mut beta = vec![0.0];
        let mut prev = vec![0.0; m];
        let mut cur = vec![1.0 / (m as f64).sqrt(); m];
        for j in 0..=degree {
            let a: f64 = grid.iter().zip(&cur).map(|(x, p)| x * p * p).sum();
            alpha.push(a);
            if j == degree {
                break;
            }
            let mut next: Vec<f64> = (0..m)
                .map(|i| (grid[i] - a) * cur[i] - beta[j] * prev[i])
                .collect();
            // one reorthogonalization pass against the two previous vectors
            for basis in [&cur, &prev] {
                let proj: f64 = next.iter().zip(basis.iter()).map(|(x, y)| x * y).sum();
                next.iter_mut()
                    .zip(basis.iter())
                    .for_each(|(x, y)| *x -= proj * y);
            }
            let b = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            next.iter_mut().for_each(|x| *x /= b);
            beta.push(b);
            prev = std::mem::replace(&mut cur, next);
        }
        Ok(Self { m, alpha, beta })
    }

    pub fn degree(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// Recurrence coefficient `β_j` for `1 ≤ j ≤ degree`.
    pub fn beta(&self, j: usize) -> f64 {
        self.beta[j]
    }

    /// Values `p_0(x), ..., p_degree(x)`.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.alpha.len());
        let mut prev = 0.0;
        let mut cur = 1.0 / (self.m as f64).sqrt();
        out.push(cur);
        for j in 0..self.degree() {
            let next = ((x - self.alpha[j]) * cur - self.beta[j] * prev) / self.beta[j + 1];
            prev = cur;
            cur = next;
            out.push(cur);
        }
        out
    }

    /// `(p_j(x), p_j'(x))` for `j = degree`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let (mut p_prev, mut p) = (0.0, 1.0 / (self.m as f64).sqrt());
        let (mut d_prev, mut d) = (0.0, 0.0);
        for j in 0..self.degree() {
            let b = self.beta[j + 1];
            let p_next = ((x - self.alpha[j]) * p - self.beta[j] * p_prev) / b;
            let d_next = ((x - self.alpha[j]) * d + p - self.beta[j] * d_prev) / b;
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d)
    }

    /// Leading coefficient `a_{j,m}` of `p_j`.
    pub fn leading_coefficient(&self, j: usize) -> f64 {
        let mut a = 1.0 / (self.m as f64).sqrt();
        for k in 1..=j {
            a /= self.beta[k];
        }
        a
    }

    /// Roots of `p_degree`, in increasing order.
    ///
    /// The roots of consecutive orthogonal polynomials interlace, so the roots
    /// of `p_{j−1}` together with the endpoints `±1` bracket those of `p_j`;
    /// each bracket is refined by bisection.
    pub fn roots(&self) -> Result<Vec<f64>> {
        let mut roots: Vec<f64> = Vec::new();
        for j in 1..=self.degree() {
            let eval = |x: f64| self.eval_all(x)[j];
            let mut brackets = Vec::with_capacity(j + 1);
            brackets.push(-1.0);
            brackets.extend_from_slice(&roots);
            brackets.push(1.0);
            let mut next = Vec::with_capacity(j);
            for pair in brackets.windows(2) {
                next.push(bisect(eval, pair[0], pair[1])?);
            }
            roots = next;
        }
        Ok(roots)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change of Gram polynomial on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gauss-type rule `S_M` for the normalized discrete sum `(2/m) Σ_j F(x_j)`.
///
/// Nodes are the `M` roots of `p_{M,m}`. Weights solve the exactness system
/// `Σ_k ω_k p_i(ξ_k) = (2/m) Σ_j p_i(x_j)`, `i < M`, written in the
/// orthonormal basis so it stays well conditioned.
pub fn gram_rule(degree: usize, m: usize) -> Result<QuadratureRule> {
    if degree == 0 {
        return Err(Error::InvalidParameter("Gram rule needs M ≥ 1".into()));
    }
    if m < degree + 1 {
        return Err(Error::InvalidParameter(format!(
            "Gram rule with M = {degree} needs m ≥ {}, got m = {m}",
            degree + 1
        )));
    }
    let poly = GramPolynomials::new(degree, m)?;
    let nodes = poly.roots()?;
    let grid = equidistant_grid(m);
    let scale = 2.0 / m as f64;

    let mut rhs = DVector::zeros(degree);
    for x in &grid {
        for (i, p) in poly.eval_all(*x).into_iter().take(degree).enumerate() {
            rhs[i] += scale * p;
        }
    }
    let mut system = DMatrix::zeros(degree, degree);
    for (k, xi) in nodes.iter().enumerate() {
        for (i, p) in poly.eval_all(*xi).into_iter().take(degree).enumerate() {
            system[(i, k)] = p;
        }
    }
    let weights = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::RootFinding("singular Gram exactness system".into()))?;

    Ok(QuadratureRule {
        nodes,
        weights: weights.iter().copied().collect(),
        kind: RuleKind::Gram { m },
    })
}

/// Weights from the closed ratio formula
/// `ω_k = (a_M / a_{M−1}) · 2 / (m p'_M(ξ_k) p_{M−1}(ξ_k))`.
pub fn gram_ratio_weights(poly: &GramPolynomials, nodes: &[f64]) -> Vec<f64> {
    let degree = poly.degree();
    let ratio = poly.leading_coefficient(degree) / poly.leading_coefficient(degree - 1);
    nodes
        .iter()
        .map(|&x| {
            let (_, dp) = poly.eval_with_derivative(x);
            let p_prev = poly.eval_all(x)[degree - 1];
            ratio * 2.0 / (poly.grid_size() as f64 * dp * p_prev)
        })
        .collect()
}

/// Closed form of the leading coefficient `a_{M,m}` consistent with the
/// orthonormality on the grid:
/// `√((2M+1)(m−M−1)!/(m+M)!) · (2M)! (m−1)^M / (2^M M!²)`.
pub fn gram_leading_coefficient_closed_form(degree: usize, m: usize) -> f64 {
    let ln_fact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    let d = degree as f64;
    let ln_a = 0.5 * ((2.0 * d + 1.0).ln() + ln_fact(m - degree - 1) - ln_fact(m + degree))
        + ln_fact(2 * degree)
        + d * ((m - 1) as f64).ln()
        - d * 2f64.ln()
        - 2.0 * ln_fact(degree);
    ln_a.exp()
}
