//! Least-squares order fits on log–log data.

use crate::error::{CliError, Result};

/// Slope and intercept of `log(error) = p·log(τ) + log(C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub log_constant: f64,
    pub points: usize,
}

/// Least-squares slope of `log(error)` against `log(τ)`.
pub fn fit_order(pairs: &[(f64, f64)]) -> Result<f64> {
    Ok(fit_line(pairs)?.slope)
}

/// [`fit_order`] on the pairs whose error exceeds `10·floor`.
pub fn fit_order_filtered(pairs: &[(f64, f64)], floor: f64) -> Result<OrderFit> {
    let kept: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(_, e)| above_floor(e, floor))
        .collect();
    fit_line(&kept)
}

pub fn above_floor(error: f64, floor: f64) -> bool {
    error > 10.0 * floor
}

pub fn fit_line(pairs: &[(f64, f64)]) -> Result<OrderFit> {
    if pairs.len() < 3 {
        return Err(CliError::Fit(format!(
            "need at least 3 points, got {}",
            pairs.len()
        )));
    }
    if let Some(&(t, e)) = pairs
        .iter()
        .find(|&&(t, e)| !(t > 0.0 && e > 0.0 && t.is_finite() && e.is_finite()))
    {
        return Err(CliError::Fit(format!(
            "step sizes and errors must be positive and finite, got ({t}, {e})"
        )));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CliError::Fit("all step sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(OrderFit {
        slope,
        log_constant: my - slope * mx,
        points: pairs.len(),
    })
}
