//! `oscint quad-demo`: error decay of the quadrature rules against closed-form values.

use std::io::Write;

use clap::ValueEnum;
use oscint_core::quadrature::{
    double_rule, equidistant_grid, gauss_integrate, gauss_legendre, gram_rule, trapezoid_periodic,
    trapezoid_rule, QuadratureRule,
};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Trapezoid,
    Gauss,
    Gram,
    Double,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Trapezoid => "trapezoid",
            Rule::Gauss => "gauss",
            Rule::Gram => "gram",
            Rule::Double => "double",
        }
    }

    /// Largest parameter swept when `--max-n` is absent.
    pub fn default_max(self) -> usize {
        match self {
            Rule::Trapezoid => 24,
            Rule::Gauss => 10,
            Rule::Gram => 5,
            Rule::Double => 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub rule: &'static str,
    #[serde(rename = "param_M")]
    pub param_m_upper: Option<usize>,
    pub param_m: Option<usize>,
    #[serde(rename = "param_N")]
    pub param_n: Option<usize>,
    pub test_function: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRow {
    pub rule: &'static str,
    #[serde(rename = "param_M")]
    pub param_m_upper: Option<usize>,
    pub param_m: Option<usize>,
    #[serde(rename = "param_N")]
    pub param_n: Option<usize>,
    pub index: usize,
    pub node: f64,
    pub weight: f64,
}

pub struct Demo {
    pub errors: Vec<ErrorRow>,
    /// Nodes and weights of the largest rule in the sweep.
    pub nodes: Vec<NodeRow>,
}

pub const GRAM_POINTS: usize = 30;
pub const DOUBLE_PERIODS: usize = 20;
pub const DOUBLE_DEGREE: usize = 3;
pub const DOUBLE_TAU: f64 = 0.25;

/// `∫_0^1 dx/(2 + cos 2πx) = 1/√3`.
pub fn periodic_bump(x: f64) -> f64 {
    1.0 / (2.0 + (2.0 * std::f64::consts::PI * x).cos())
}

pub fn cmd_quad_demo(rule: Rule, max_n: Option<usize>) -> Result<Demo> {
    let max = max_n.unwrap_or(rule.default_max());
    let row = |m_upper, m, n, f: &str, error: f64| ErrorRow {
        rule: rule.name(),
        param_m_upper: m_upper,
        param_m: m,
        param_n: n,
        test_function: f.to_string(),
        error,
    };
    let mut errors = Vec::new();
    let last: QuadratureRule;
    let (mut m_upper, mut m, mut n_nodes) = (None, None, None);
    match rule {
        Rule::Trapezoid => {
            if max < 2 {
                return Err(CliError::Config("trapezoid demo needs --max-n ≥ 2".into()));
            }
            let exact = 1.0 / 3f64.sqrt();
            for n in 2..=max {
                let v = trapezoid_periodic(periodic_bump, n)?;
                errors.push(row(
                    None,
                    None,
                    Some(n),
                    "1/(2+cos(2pi x))",
                    (v - exact).abs(),
                ));
            }
            last = trapezoid_rule(max)?;
            n_nodes = Some(max);
        }
        Rule::Gauss => {
            if max < 1 {
                return Err(CliError::Config("gauss demo needs --max-n ≥ 1".into()));
            }
            // e − 1 from its series, ln 3 from atanh(1/2) = ½ ln 3
            let e_minus_one: f64 = (1..30)
                .scan(1.0, |term, k| {
                    *term /= k as f64;
                    Some(*term)
                })
                .sum();
            let ln3 = 2.0 * (0.5f64).atanh();
            for n in 1..=max {
                let v = gauss_integrate(f64::exp, 0.0, 1.0, n)?;
                errors.push(row(
                    None,
                    None,
                    Some(n),
                    "exp(x) on [0,1]",
                    (v - e_minus_one).abs(),
                ));
            }
            for n in 1..=max {
                let v = gauss_integrate(|x| 1.0 / (x + 2.0), -1.0, 1.0, n)?;
                errors.push(row(
                    None,
                    None,
                    Some(n),
                    "1/(x+2) on [-1,1]",
                    (v - ln3).abs(),
                ));
            }
            last = gauss_legendre(max)?;
            n_nodes = Some(max);
        }
        Rule::Gram => {
            if !(1..GRAM_POINTS).contains(&max) {
                return Err(CliError::Config(format!(
                    "gram demo needs 1 ≤ --max-n < {GRAM_POINTS}"
                )));
            }
            let grid = equidistant_grid(GRAM_POINTS);
            for degree in 1..=max {
                let r = gram_rule(degree, GRAM_POINTS)?;
                for d in 0..2 * degree as i32 {
                    let sum: f64 =
                        grid.iter().map(|x| x.powi(d)).sum::<f64>() * 2.0 / GRAM_POINTS as f64;
                    let approx = r.apply_scalar(|x| x.powi(d));
                    errors.push(row(
                        Some(degree),
                        Some(GRAM_POINTS),
                        None,
                        &format!("x^{d}"),
                        (sum - approx).abs(),
                    ));
                }
            }
            last = gram_rule(max, GRAM_POINTS)?;
            m_upper = Some(max);
            m = Some(GRAM_POINTS);
        }
        Rule::Double => {
            if max < 1 {
                return Err(CliError::Config("double demo needs --max-n ≥ 1".into()));
            }
            // T Σ_j e^{jT} ∫ dx/(2 + cos 2πx) in closed form
            let period = DOUBLE_TAU / DOUBLE_PERIODS as f64;
            let exact = period
                * (0..DOUBLE_PERIODS)
                    .map(|j| (j as f64 * period).exp())
                    .sum::<f64>()
                / 3f64.sqrt();
            for n in 1..=max {
                let v = double_rule(
                    |s, x| s.exp() * periodic_bump(x),
                    DOUBLE_TAU,
                    DOUBLE_PERIODS,
                    DOUBLE_DEGREE,
                    n,
                )?;
                errors.push(row(
                    Some(DOUBLE_DEGREE),
                    Some(DOUBLE_PERIODS),
                    Some(n),
                    "exp(s)/(2+cos(2pi x))",
                    (v - exact).abs(),
                ));
            }
            last = gauss_legendre(max)?;
            m_upper = Some(DOUBLE_DEGREE);
            m = Some(DOUBLE_PERIODS);
            n_nodes = Some(max);
        }
    }
    let nodes = last
        .nodes
        .iter()
        .zip(&last.weights)
        .enumerate()
        .map(|(index, (&node, &weight))| NodeRow {
            rule: rule.name(),
            param_m_upper: m_upper,
            param_m: m,
            param_n: n_nodes,
            index,
            node,
            weight,
        })
        .collect();
    Ok(Demo { errors, nodes })
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: "<stdout>".into(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_decays_monotonically() {
        let demo = cmd_quad_demo(Rule::Trapezoid, None).unwrap();
        assert_eq!(demo.errors.len(), 23);
        let errs: Vec<f64> = demo.errors.iter().map(|r| r.error).collect();
        // decay is exponential until rounding
        for p in errs.windows(2).take_while(|p| p[1] > 1e-14) {
            assert!(p[1] < p[0], "{p:?}");
        }
        assert!(errs[20] < 1e-12);
        assert_eq!(demo.nodes.len(), 24);
    }

    #[test]
    fn gauss_exp_decays_superexponentially() {
        let demo = cmd_quad_demo(Rule::Gauss, None).unwrap();
        let exp: Vec<f64> = demo
            .errors
            .iter()
            .filter(|r| r.test_function.starts_with("exp"))
            .map(|r| r.error)
            .collect();
        assert_eq!(exp.len(), 10);
        assert!(exp[0] > 1e-2);
        assert!(exp[5] < 1e-13);
        // successive ratios shrink
        let r1 = exp[1] / exp[0];
        let r3 = exp[3] / exp[2];
        assert!(r3 < r1);
    }

    #[test]
    fn gram_monomials_are_exact() {
        let demo = cmd_quad_demo(Rule::Gram, Some(3)).unwrap();
        let m3: Vec<&ErrorRow> = demo
            .errors
            .iter()
            .filter(|r| r.param_m_upper == Some(3))
            .collect();
        assert_eq!(m3.len(), 6);
        assert!(demo.errors.iter().all(|r| r.error < 1e-11));
        assert_eq!(demo.nodes.len(), 3);
        assert!(cmd_quad_demo(Rule::Gram, Some(40)).is_err());
    }

    #[test]
    fn csv_header() {
        let demo = cmd_quad_demo(Rule::Double, Some(3)).unwrap();
        let mut buf = Vec::new();
        write_csv(&demo.errors, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("rule,param_M,param_m,param_N,test_function,error")
        );
        assert!(lines.next().unwrap().starts_with("double,3,20,1,"));
    }
}
