//! Run configuration files.

use std::path::{Path, PathBuf};

use oscint_core::integrator::{default_gram_degree, SchemeParams, TruthSolver};
use oscint_core::problems::ProblemSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub t_final: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub reference: ReferenceConfig,
}

/// Scheme parameters as written in a config; `M` defaults to `⌊(l+1)/2⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub l: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub gram_degree: Option<usize>,
    #[serde(rename = "N", default = "default_gauss_nodes")]
    pub gauss_nodes: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub c: f64,
    pub m: usize,
}

fn default_gauss_nodes() -> usize {
    8
}

fn default_gamma() -> f64 {
    0.5
}

impl SchemeConfig {
    pub fn params(&self) -> SchemeParams {
        SchemeParams {
            l: self.l,
            gram_degree: self.gram_degree.unwrap_or(default_gram_degree(self.l)),
            gauss_nodes: self.gauss_nodes,
            gamma: self.gamma,
            c: self.c,
            m: self.m,
        }
    }
}

/// How the reference solution for error columns is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceConfig {
    /// Gauss collocation on the twisted system.
    Collocation {
        #[serde(default = "default_stages")]
        stages: usize,
        #[serde(default = "default_steps_per_period")]
        steps_per_period: usize,
    },
    /// A finer run of the scheme itself.
    Scheme {
        l: usize,
        m: usize,
        #[serde(rename = "N", default = "default_gauss_nodes")]
        gauss_nodes: usize,
    },
    None,
}

fn default_stages() -> usize {
    TruthSolver::default().stages
}

fn default_steps_per_period() -> usize {
    TruthSolver::default().steps_per_period
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        let truth = TruthSolver::default();
        ReferenceConfig::Collocation {
            stages: truth.stages,
            steps_per_period: truth.steps_per_period,
        }
    }
}

pub const MAX_ORDER: usize = 4;
pub const MAX_GAUSS_NODES: usize = 64;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> SchemeParams {
        self.scheme.params()
    }

    pub fn validate(&self) -> Result<()> {
        validate_scheme(&self.scheme)?;
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(CliError::Config(format!(
                "t_final must be finite and non-negative, got {}",
                self.t_final
            )));
        }
        match self.reference {
            ReferenceConfig::Collocation {
                stages,
                steps_per_period,
            } if stages == 0 || steps_per_period == 0 => Err(CliError::Config(
                "collocation reference needs stages ≥ 1 and steps_per_period ≥ 1".into(),
            )),
            ReferenceConfig::Scheme { l, m, gauss_nodes } => validate_scheme(&SchemeConfig {
                l,
                gram_degree: None,
                gauss_nodes,
                gamma: self.scheme.gamma,
                c: self.scheme.c,
                m,
            }),
            _ => Ok(()),
        }
    }
}

pub fn validate_scheme(s: &SchemeConfig) -> Result<()> {
    if !(1..=MAX_ORDER).contains(&s.l) {
        return Err(CliError::Config(format!(
            "l must lie in 1..={MAX_ORDER}, got {}",
            s.l
        )));
    }
    if !(1..=MAX_GAUSS_NODES).contains(&s.gauss_nodes) {
        return Err(CliError::Config(format!(
            "N must lie in 1..={MAX_GAUSS_NODES}, got {}",
            s.gauss_nodes
        )));
    }
    if !(s.c >= 1.0 && s.c.is_finite()) {
        return Err(CliError::Config(format!(
            "c must be at least 1, got {}",
            s.c
        )));
    }
    if s.m == 0 {
        return Err(CliError::Config("m must be at least 1".into()));
    }
    s.params()
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))
}
