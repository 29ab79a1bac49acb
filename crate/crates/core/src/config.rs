//! Run configuration: a TOML file plus `key=value` overrides. Unknown keys
//! are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DataFamily;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::kernel::GridPolicy;
use crate::params::Params;
use crate::trajectory::TimeGrid;
use crate::verify::ExperimentId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    /// Hölder exponent; the midpoint of its admissible interval when absent.
    pub gamma: Option<f64>,
    pub max_deriv: usize,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig { alpha: 1.5, beta: 0.8, d: 1, gamma: None, max_deriv: Params::DEFAULT_MAX_DERIV }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> Result<Params> {
        let mut p = Params::new(self.alpha, self.beta, self.d)?.with_max_deriv(self.max_deriv)?;
        if let Some(g) = self.gamma {
            p = p.with_gamma(g)?;
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub lx: f64,
    pub lv: f64,
    pub nx: usize,
    pub nv: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { lx: 24.0, lv: 24.0, nx: 256, nv: 256 }
    }
}

impl GridConfig {
    pub fn build(&self, d: usize) -> Result<TorusGrid> {
        TorusGrid::new(d, self.lx, self.lv, self.nx, self.nv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeKind {
    Dyadic,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub kind: TimeKind,
    pub horizon: f64,
    /// Smallest dyadic exponent.
    pub jmin: i32,
    /// Sample count of a uniform grid.
    pub samples: usize,
    pub nodes_per_interval: usize,
    pub grading: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            kind: TimeKind::Dyadic,
            horizon: 1.0,
            jmin: -6,
            samples: 8,
            nodes_per_interval: TimeGrid::DEFAULT_NODES,
            grading: TimeGrid::DEFAULT_GRADING,
        }
    }
}

impl TimeConfig {
    pub fn build(&self) -> Result<TimeGrid> {
        let g = match self.kind {
            TimeKind::Dyadic => TimeGrid::dyadic(self.horizon, self.jmin)?,
            TimeKind::Uniform => TimeGrid::uniform(self.horizon, self.samples)?,
        };
        g.with_nodes(self.nodes_per_interval, self.grading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Picard,
    Splitting,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    /// Picard stopping tolerance, relative to the norm of the linear part.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed-norm threshold above which a warning is logged.
    pub smallness: Option<f64>,
    /// Splitting time step.
    pub dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: Method::Picard, tol: 1e-8, max_iter: 10, smallness: None, dt: 1.0 / 64.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Fixed,
    KineticScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub times: Vec<f64>,
    /// `(m, n)` derivative orders along the first component.
    pub orders: Vec<(usize, usize)>,
    pub policy: PolicyKind,
    /// Kernel grid; for the kinetic-scaled policy this is the grid at `t = 1`.
    pub grid: GridConfig,
    /// Half-width, in kinetic scales, of the pointwise-ratio window.
    pub window: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            times: vec![0.25, 1.0, 4.0],
            orders: vec![(0, 0), (0, 1), (1, 0)],
            policy: PolicyKind::KineticScaled,
            grid: GridConfig { lx: 32.0, lv: 24.0, nx: 512, nv: 256 },
            window: 5.0,
        }
    }
}

impl KernelConfig {
    pub fn policy(&self, d: usize) -> Result<GridPolicy> {
        let g = self.grid.build(d)?;
        Ok(match self.policy {
            PolicyKind::Fixed => GridPolicy::Fixed(g),
            PolicyKind::KineticScaled => GridPolicy::KineticScaled(g),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Experiments to run; all of them when empty.
    pub experiments: Vec<ExperimentId>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { experiments: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; rayon's default when absent.
    pub threads: Option<usize>,
    /// Output root; see [`crate::io::output_root`] for the fallbacks.
    pub output: Option<PathBuf>,
    /// Write every sample of solved trajectories as array files.
    pub write_arrays: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { seed: 7, threads: None, output: None, write_arrays: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub params: ParamsConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub data: DataFamily,
    pub solver: SolverConfig,
    pub kernel: KernelConfig,
    pub verify: VerifyConfig,
    pub run: RunConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: ParamsConfig::default(),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            data: DataFamily::Gaussian { amplitude: 0.15, wx: 1.0, wv: 0.5 },
            solver: SolverConfig::default(),
            kernel: KernelConfig::default(),
            verify: VerifyConfig::default(),
            run: RunConfig::default(),
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

impl Config {
    /// Parses TOML text, applies `key.path=value` overrides, validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value = text.parse::<toml::Table>().map_err(|e| config_err("toml", e.to_string()))?.into();
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: Config = value.try_into().map_err(|e: toml::de::Error| config_err("toml", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| config_err("config", format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn params(&self) -> Result<Params> {
        self.params.build()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.params()?;
        self.grid.build(p.d)?;
        self.time.build()?;
        self.kernel.policy(p.d)?;
        let s = &self.solver;
        if !(s.tol > 0.0) {
            return Err(config_err("solver.tol", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(config_err("solver.max_iter", "must be at least 1"));
        }
        if !(s.dt > 0.0) {
            return Err(config_err("solver.dt", "must be positive"));
        }
        if s.smallness.is_some_and(|v| !(v > 0.0)) {
            return Err(config_err("solver.smallness", "must be positive"));
        }
        if self.kernel.times.iter().any(|t| !(*t > 0.0)) {
            return Err(config_err("kernel.times", "must be positive"));
        }
        if !(self.kernel.window > 0.0) {
            return Err(config_err("kernel.window", "must be positive"));
        }
        if self.run.threads == Some(0) {
            return Err(config_err("run.threads", "must be at least 1"));
        }
        if !self.data.amplitude().is_finite() {
            return Err(config_err("data.amplitude", "must be finite"));
        }
        Ok(())
    }

    pub fn experiments(&self) -> Vec<ExperimentId> {
        if self.verify.experiments.is_empty() {
            ExperimentId::ALL.to_vec()
        } else {
            self.verify.experiments.clone()
        }
    }
}

/// `a.b.c=value`; the value is read as TOML and falls back to a string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| config_err("--set", format!("`{spec}` is not key=value")))?;
    let parsed = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| config_err(key, "path runs through a non-table value"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(config_err("--set", "empty key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(Config::from_toml("", &[]).unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("[grid]\nnx = 64\nwidth = 3\n", &[]).is_err());
        assert!(Config::from_toml("[nope]\n", &[]).is_err());
        assert!(Config::from_toml("[data]\nkind = \"gaussian\"\namplitude = 1.0\nwx = 1.0\nwv = 1.0\nextra = 2\n", &[]).is_err());
    }

    #[test]
    fn overrides_apply_and_validate() {
        let c = Config::from_toml("[grid]\nnx = 64\n", &["grid.nv=32".into(), "verify.experiments=[\"picard\"]".into()]).unwrap();
        assert_eq!((c.grid.nx, c.grid.nv), (64, 32));
        assert_eq!(c.experiments(), vec![ExperimentId::Picard]);
        assert!(Config::from_toml("", &["params.alpha=0.5".into()]).is_err());
        assert!(Config::from_toml("", &["solver.tol=-1".into()]).is_err());
        assert!(Config::from_toml("", &["noequals".into()]).is_err());
    }
}
