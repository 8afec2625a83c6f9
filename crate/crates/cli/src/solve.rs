//! `oscint solve`: one run, trajectory CSV and summary JSON.

use std::path::{Path, PathBuf};
use std::time::Instant;

use oscint_core::integrator::run;
use oscint_core::problems::build_problem;
use serde::Serialize;

use crate::config::{ReferenceConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::reference::{phi_distance, phi_norm, reference_phis};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub config: RunConfig,
    pub tau: f64,
    pub steps: usize,
    pub t_end: f64,
    pub final_norm_phi: f64,
    pub final_norm_w: f64,
    pub max_err_vs_ref: Option<f64>,
    pub final_err_vs_ref: Option<f64>,
    pub reference_error: Option<String>,
    pub blow_up: bool,
    pub warning: Option<String>,
    pub f_evals: usize,
    pub runtime_s: f64,
}

#[derive(Serialize)]
struct Row {
    t: f64,
    norm_phi: f64,
    norm_w: f64,
    err_vs_ref: Option<f64>,
}

/// Runs the configured problem and writes `trajectory.csv` and `summary.json`
/// into `out_dir`. A blow-up still writes both files, then returns
/// [`CliError::BlowUp`].
pub fn cmd_solve(config: &RunConfig, out_dir: &Path) -> Result<SolveSummary> {
    config.validate()?;
    let params = config.params();
    let problem =
        build_problem(&config.problem, params.c).map_err(|e| CliError::Config(e.to_string()))?;
    let start = Instant::now();
    let traj = run(&problem, &params, config.t_final)?;

    let (errors, reference_error) = match config.reference {
        ReferenceConfig::None => (None, None),
        method => match reference_phis(&problem, &method, params.gamma, &traj.times) {
            Ok(refs) => {
                let errs: Vec<f64> = traj
                    .phi
                    .iter()
                    .zip(&refs)
                    .map(|(a, b)| phi_distance(a, b))
                    .collect();
                (Some(errs), None)
            }
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let runtime_s = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let csv_path = out_dir.join(TRAJECTORY_FILE);
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|e| write_error(&csv_path, e))?;
    for (i, (&t, (phi, w))) in traj
        .times
        .iter()
        .zip(traj.phi.iter().zip(&traj.states))
        .enumerate()
    {
        writer
            .serialize(Row {
                t,
                norm_phi: phi_norm(phi),
                norm_w: w.norm(),
                err_vs_ref: errors.as_ref().map(|e| e[i]),
            })
            .map_err(|e| write_error(&csv_path, e))?;
    }
    writer.flush().map_err(|source| CliError::Write {
        path: csv_path.clone(),
        source,
    })?;

    let summary = SolveSummary {
        config: config.clone(),
        tau: params.tau(),
        steps: traj.times.len() - 1,
        t_end: traj.final_time(),
        final_norm_phi: phi_norm(traj.final_phi()),
        final_norm_w: traj.final_state().norm(),
        max_err_vs_ref: errors
            .as_ref()
            .map(|e| e.iter().copied().fold(0.0, f64::max)),
        final_err_vs_ref: errors.as_ref().and_then(|e| e.last().copied()),
        reference_error,
        blow_up: traj.blow_up,
        warning: traj.warning.clone(),
        f_evals: traj.diagnostics.iter().map(|d| d.f_evals).sum(),
        runtime_s,
    };
    let json_path = out_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&json_path, json + "\n").map_err(|source| CliError::Write {
        path: json_path,
        source,
    })?;

    if traj.blow_up {
        return Err(CliError::BlowUp {
            time: traj.final_time(),
        });
    }
    Ok(summary)
}

pub(crate) fn write_error(path: &Path, e: csv::Error) -> CliError {
    match CliError::from(e) {
        CliError::Write { source, .. } => CliError::Write {
            path: PathBuf::from(path),
            source,
        },
        other => other,
    }
}
