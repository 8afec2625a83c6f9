//! `oscint converge`: sweeps over `(c, l, N, m)` with observed-order fits.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use oscint_core::integrator::{run, step_count, SchemeParams};
use oscint_core::problems::build_problem;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{validate_scheme, ReferenceConfig, RunConfig, SchemeConfig};
use crate::error::{CliError, Result};
use crate::fit::{above_floor, fit_line};
use crate::reference::{phi_distance, reference_phis};
use crate::solve::write_error;

pub const THREADS_ENV: &str = "OSCINT_THREADS";

/// Values swept in a convergence study; unswept axes keep the config value.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub m: Vec<usize>,
    pub c: Vec<f64>,
    pub l: Vec<usize>,
    pub n: Vec<usize>,
}

impl Sweep {
    pub fn from_config(config: &RunConfig) -> Self {
        let s = &config.scheme;
        Self {
            m: vec![s.m],
            c: vec![s.c],
            l: vec![s.l],
            n: vec![s.gauss_nodes],
        }
    }

    /// Parses `key=v1,v2,...` with `key` one of `m`, `c`, `l`, `N`.
    pub fn apply(&mut self, arg: &str) -> Result<()> {
        let (key, values) = arg.split_once('=').ok_or_else(|| {
            CliError::Config(format!("sweep `{arg}` is not of the form key=v1,v2"))
        })?;
        let items: Vec<&str> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .collect();
        if items.is_empty() {
            return Err(CliError::Config(format!("sweep `{arg}` lists no values")));
        }
        let bad = |v: &str| CliError::Config(format!("sweep {key}: cannot parse `{v}`"));
        match key.trim() {
            "m" => self.m = parse_all(&items, bad)?,
            "c" => self.c = parse_all(&items, bad)?,
            "l" => self.l = parse_all(&items, bad)?,
            "N" => self.n = parse_all(&items, bad)?,
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep key `{other}` (expected m, c, l or N)"
                )))
            }
        }
        Ok(())
    }
}

fn parse_all<T: std::str::FromStr>(
    items: &[&str],
    bad: impl Fn(&str) -> CliError,
) -> Result<Vec<T>> {
    items
        .iter()
        .map(|v| v.parse().map_err(|_| bad(v)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub c: f64,
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub steps: usize,
    pub t_end: f64,
    pub error: Option<f64>,
    pub floor: f64,
    pub used_in_fit: bool,
    pub reference_ok: bool,
    pub note: Option<String>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub c: f64,
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub points: usize,
    pub slope: Option<f64>,
    /// Geometric mean of `error/τ^l` over the fitted cells.
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Uniformity {
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub c_values: usize,
    /// `max/min` of the error constants across `c`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub cells: Vec<Cell>,
    pub fits: Vec<FitRow>,
    pub uniformity: Vec<Uniformity>,
}

impl ConvergenceReport {
    pub fn fit(&self, c: f64, l: usize, n: usize) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.c == c && f.l == l && f.n == n)
    }

    pub fn uniformity(&self, l: usize, n: usize) -> Option<&Uniformity> {
        self.uniformity.iter().find(|u| u.l == l && u.n == n)
    }
}

/// Worker count from `OSCINT_THREADS`, or `None` for the rayon default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

struct Plan {
    scheme: SchemeConfig,
    params: SchemeParams,
    steps: usize,
    t_end: f64,
}

type RefKey = (String, u64, u64);

/// Runs every cell of the sweep. References are computed once per
/// `(problem, c, t_end)` and shared between cells.
pub fn converge(
    config: &RunConfig,
    sweep: &Sweep,
    threads: Option<usize>,
) -> Result<ConvergenceReport> {
    config.validate()?;
    if matches!(config.reference, ReferenceConfig::None) {
        return Err(CliError::Config(
            "convergence sweeps need a reference solver".into(),
        ));
    }
    if sweep.m.is_empty() || sweep.c.is_empty() || sweep.l.is_empty() || sweep.n.is_empty() {
        return Err(CliError::Config("sweep lists must be non-empty".into()));
    }
    let mut plans = Vec::new();
    for &c in &sweep.c {
        for &l in &sweep.l {
            for &n in &sweep.n {
                for &m in &sweep.m {
                    let scheme = SchemeConfig {
                        l,
                        gram_degree: if l == config.scheme.l {
                            config.scheme.gram_degree
                        } else {
                            None
                        },
                        gauss_nodes: n,
                        gamma: config.scheme.gamma,
                        c,
                        m,
                    };
                    validate_scheme(&scheme)?;
                    let params = scheme.params();
                    let steps = step_count(config.t_final, params.tau());
                    plans.push(Plan {
                        scheme,
                        params,
                        steps,
                        t_end: steps as f64 * params.tau(),
                    });
                }
            }
        }
    }
    plans.sort_by(|a, b| {
        let key = |p: &Plan| (p.scheme.c, p.scheme.l, p.scheme.gauss_nodes, p.scheme.m);
        key(a).partial_cmp(&key(b)).expect("finite sweep values")
    });
    plans.dedup_by(|a, b| a.scheme == b.scheme);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;

    let spec_key = serde_json::to_string(&config.problem).expect("problem serializes");
    let mut wanted: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in plans.iter().filter(|p| p.steps > 0) {
        wanted
            .entry(p.scheme.c.to_bits())
            .or_default()
            .push(p.t_end);
    }
    let references: HashMap<RefKey, std::result::Result<Vec<Complex64>, String>> =
        pool.install(|| {
            wanted
                .par_iter()
                .flat_map_iter(|(&c_bits, times)| {
                    let c = f64::from_bits(c_bits);
                    let computed = build_problem(&config.problem, c)
                        .map_err(CliError::from)
                        .and_then(|p| {
                            reference_phis(&p, &config.reference, config.scheme.gamma, times)
                        });
                    let entries: Vec<_> = match computed {
                        Ok(phis) => times
                            .iter()
                            .zip(phis)
                            .map(|(t, phi)| ((spec_key.clone(), c_bits, t.to_bits()), Ok(phi)))
                            .collect(),
                        Err(e) => times
                            .iter()
                            .map(|t| ((spec_key.clone(), c_bits, t.to_bits()), Err(e.to_string())))
                            .collect(),
                    };
                    entries
                })
                .collect()
        });

    let cells: Vec<Cell> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| run_cell(config, plan, &references, &spec_key))
            .collect::<Result<Vec<Cell>>>()
    })?;

    let mut fits = Vec::new();
    let mut groups: Vec<(f64, usize, usize)> = cells.iter().map(|c| (c.c, c.l, c.n)).collect();
    groups.dedup();
    for &(c, l, n) in &groups {
        let used: Vec<&Cell> = cells
            .iter()
            .filter(|x| x.c == c && x.l == l && x.n == n && x.used_in_fit)
            .collect();
        let pairs: Vec<(f64, f64)> = used.iter().map(|x| (x.tau, x.error.unwrap())).collect();
        let slope = fit_line(&pairs).ok().map(|f| f.slope);
        let constant = (!used.is_empty()).then(|| {
            let mean_log = pairs
                .iter()
                .map(|&(t, e)| e.ln() - l as f64 * t.ln())
                .sum::<f64>()
                / pairs.len() as f64;
            mean_log.exp()
        });
        fits.push(FitRow {
            c,
            l,
            n,
            points: pairs.len(),
            slope,
            constant,
        });
    }

    let mut uniformity = Vec::new();
    let mut ln: Vec<(usize, usize)> = groups.iter().map(|&(_, l, n)| (l, n)).collect();
    ln.sort();
    ln.dedup();
    for (l, n) in ln {
        let constants: Vec<f64> = fits
            .iter()
            .filter(|f| f.l == l && f.n == n)
            .filter_map(|f| f.constant)
            .collect();
        let ratio = (!constants.is_empty()).then(|| {
            let max = constants.iter().copied().fold(f64::MIN, f64::max);
            let min = constants.iter().copied().fold(f64::MAX, f64::min);
            max / min
        });
        uniformity.push(Uniformity {
            l,
            n,
            c_values: constants.len(),
            ratio,
        });
    }
    Ok(ConvergenceReport {
        cells,
        fits,
        uniformity,
    })
}

fn run_cell(
    config: &RunConfig,
    plan: &Plan,
    references: &HashMap<RefKey, std::result::Result<Vec<Complex64>, String>>,
    spec_key: &str,
) -> Result<Cell> {
    let s = plan.scheme;
    let floor = plan.params.floor_estimate();
    let mut cell = Cell {
        c: s.c,
        l: s.l,
        n: s.gauss_nodes,
        m: s.m,
        tau: plan.params.tau(),
        steps: plan.steps,
        t_end: plan.t_end,
        error: None,
        floor,
        used_in_fit: false,
        reference_ok: false,
        note: None,
        runtime_s: 0.0,
    };
    if plan.steps == 0 {
        cell.note = Some(format!("τ exceeds t_final = {}", config.t_final));
        return Ok(cell);
    }
    let key = (spec_key.to_string(), s.c.to_bits(), plan.t_end.to_bits());
    let reference = match references.get(&key) {
        Some(Ok(phi)) => phi,
        Some(Err(e)) => {
            cell.note = Some(format!("reference failed: {e}"));
            return Ok(cell);
        }
        None => unreachable!("reference requested for every cell with steps"),
    };
    cell.reference_ok = true;
    let problem =
        build_problem(&config.problem, s.c).map_err(|e| CliError::Config(e.to_string()))?;
    let start = Instant::now();
    match run(&problem, &plan.params, plan.t_end) {
        Ok(traj) if traj.blow_up => {
            cell.note = Some(format!("blow-up at t = {}", traj.final_time()));
        }
        Ok(traj) => {
            let error = phi_distance(traj.final_phi(), reference);
            cell.error = Some(error);
            cell.used_in_fit = error.is_finite() && error > 0.0 && above_floor(error, floor);
            if !cell.used_in_fit {
                cell.note = Some("below 10·γ^{2N}".into());
            }
        }
        Err(e) => cell.note = Some(e.to_string()),
    }
    cell.runtime_s = start.elapsed().as_secs_f64();
    Ok(cell)
}

#[derive(Serialize)]
struct CellRow<'a> {
    c: f64,
    l: usize,
    #[serde(rename = "N")]
    n: usize,
    m: usize,
    tau: f64,
    steps: usize,
    t_end: f64,
    error: Option<f64>,
    floor: f64,
    used_in_fit: bool,
    reference_ok: bool,
    note: &'a str,
}

pub const CELLS_FILE: &str = "convergence.csv";
pub const FITS_FILE: &str = "fits.csv";
pub const UNIFORMITY_FILE: &str = "uniformity.csv";
pub const REPORT_FILE: &str = "report.json";

/// Writes the cell table, fits and uniformity ratios as CSV plus the whole
/// report as JSON. Timings appear only in the JSON.
pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(CELLS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_error(&path, e))?;
    for x in &report.cells {
        w.serialize(CellRow {
            c: x.c,
            l: x.l,
            n: x.n,
            m: x.m,
            tau: x.tau,
            steps: x.steps,
            t_end: x.t_end,
            error: x.error,
            floor: x.floor,
            used_in_fit: x.used_in_fit,
            reference_ok: x.reference_ok,
            note: x.note.as_deref().unwrap_or(""),
        })
        .map_err(|e| write_error(&path, e))?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;

    write_rows(&dir.join(FITS_FILE), &report.fits)?;
    write_rows(&dir.join(UNIFORMITY_FILE), &report.uniformity)?;

    let path = dir.join(REPORT_FILE);
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(&path, json + "\n").map_err(|source| CliError::Write { path, source })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> RunConfig {
        RunConfig::from_json(
            r#"{
                "problem": {"kind": "ode", "d": 1, "q0": [1.0, 0.0], "p0": [0.0, 1.0]},
                "scheme": {"l": 1, "N": 16, "c": 100.0, "m": 1},
                "t_final": 0.25
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn sweep_parsing() {
        let config = toy_config();
        let mut sweep = Sweep::from_config(&config);
        assert_eq!(sweep.m, vec![1]);
        sweep.apply("m=1,2, 4").unwrap();
        sweep.apply("c=10,100").unwrap();
        sweep.apply("N=8").unwrap();
        assert_eq!(sweep.m, vec![1, 2, 4]);
        assert_eq!(sweep.c, vec![10.0, 100.0]);
        assert_eq!(sweep.n, vec![8]);
        for bad in ["m", "m=", "m=a", "q=1", "l=1.5"] {
            assert!(
                matches!(sweep.apply(bad), Err(CliError::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn first_order_sweep() {
        let config = toy_config();
        let mut sweep = Sweep::from_config(&config);
        sweep.apply("m=1,2,4,8,16").unwrap();
        let report = converge(&config, &sweep, Some(1)).unwrap();
        assert_eq!(report.cells.len(), 5);
        assert!(report.cells.windows(2).all(|p| p[0].m < p[1].m));
        let fit = report.fit(100.0, 1, 16).unwrap();
        let slope = fit.slope.unwrap();
        assert!((0.7..=1.4).contains(&slope), "{slope}");
        assert_eq!(report.uniformity(1, 16).unwrap().ratio, Some(1.0));
    }

    #[test]
    fn steps_beyond_t_final_are_reported() {
        let mut config = toy_config();
        config.t_final = 1e-3;
        let mut sweep = Sweep::from_config(&config);
        sweep.apply("m=1,2").unwrap();
        let report = converge(&config, &sweep, Some(1)).unwrap();
        let long = &report.cells[1];
        assert_eq!(long.steps, 0);
        assert!(long.error.is_none() && !long.used_in_fit);
        assert!(long.note.is_some());
        assert!(report.fit(100.0, 1, 16).unwrap().slope.is_none());
    }

    #[test]
    fn output_is_deterministic() {
        let config = toy_config();
        let mut sweep = Sweep::from_config(&config);
        sweep.apply("m=4,1,2").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = converge(&config, &sweep, Some(1)).unwrap();
        write_report(&a, dir.path()).unwrap();
        let first = std::fs::read_to_string(dir.path().join(CELLS_FILE)).unwrap();
        let b = converge(&config, &sweep, Some(2)).unwrap();
        write_report(&b, dir.path()).unwrap();
        let second = std::fs::read_to_string(dir.path().join(CELLS_FILE)).unwrap();
        assert_eq!(first, second);
        assert!(first
            .starts_with("c,l,N,m,tau,steps,t_end,error,floor,used_in_fit,reference_ok,note\n"));
        assert_eq!(first.lines().count(), 4);
    }
}
