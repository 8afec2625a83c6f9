//! Reference solutions for error columns and sweeps.

use num_complex::Complex64;
use oscint_core::integrator::{
    default_gram_degree, initial_twist, run, untwist_at, SchemeParams, TruthSolver,
};
use oscint_core::problems::Problem;

use crate::config::ReferenceConfig;
use crate::error::{CliError, Result};

/// `φ_ref(t)` at each of `times` (any order, repeats allowed).
pub fn reference_phis(
    problem: &Problem,
    method: &ReferenceConfig,
    gamma: f64,
    times: &[f64],
) -> Result<Vec<Vec<Complex64>>> {
    let c = problem.c();
    let basis = problem.basis();
    match *method {
        ReferenceConfig::None => Err(CliError::Config("no reference solver configured".into())),
        ReferenceConfig::Collocation {
            stages,
            steps_per_period,
        } => {
            let mut sorted = times.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let w0 = initial_twist(problem.phi0(), problem.phi0_prime(), c, basis)?;
            let solver = TruthSolver {
                stages,
                steps_per_period,
            };
            let states = solver.solve(&w0, &sorted, c, problem.nonlinearity(), basis)?;
            times
                .iter()
                .map(|t| {
                    let i = sorted.partition_point(|s| s < t);
                    Ok(untwist_at(&states[i], *t, c, basis)?)
                })
                .collect()
        }
        ReferenceConfig::Scheme { l, m, gauss_nodes } => {
            let params = SchemeParams {
                l,
                gram_degree: default_gram_degree(l),
                gauss_nodes,
                gamma,
                c,
                m,
            };
            let tau = params.tau();
            let t_max = times.iter().copied().fold(0.0, f64::max);
            let steps = (t_max / tau).round();
            let traj = run(problem, &params, steps * tau)?;
            times
                .iter()
                .map(|&t| {
                    let n = (t / tau).round();
                    let aligned = (n * tau - t).abs() <= 1e-9 * t.max(1.0);
                    match traj.phi.get(n as usize) {
                        Some(phi) if aligned => Ok(phi.clone()),
                        _ => Err(CliError::Config(format!(
                            "reference step τ = {tau} does not divide t = {t}"
                        ))),
                    }
                })
                .collect()
        }
    }
}

pub fn phi_norm(phi: &[Complex64]) -> f64 {
    phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn phi_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
