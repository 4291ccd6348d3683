//! Run configuration: a TOML file of flat sections plus `section.key=value`
//! overrides, deserialized with field-path error reporting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{unknown_check, ExperimentConfig, CHECKS};
use crate::experiments::runs::GridConfig;
use crate::params::{derive_exponents, ExponentSet};
use crate::solver::{Frame, InitialCondition, SolverConfig};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "VSSLAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentBlock {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "N")]
    pub n: u32,
}

impl Default for ExponentBlock {
    fn default() -> Self {
        Self { p: 1.6, q: 0.85, n: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Physical,
    /// `(α, β)` self-similar variables, `τ = 1 + t`.
    Rescaled,
    /// Mass-preserving `(Nη, η)` variables with origin `t0`.
    Diffusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveBlock {
    pub frame: FrameKind,
    /// Frame origin for the diffusive frame.
    pub t0: f64,
    pub t_end: f64,
    /// Physical observation times.
    pub observations: Vec<f64>,
    pub tail_radii: Vec<f64>,
}

impl Default for EvolveBlock {
    fn default() -> Self {
        Self {
            frame: FrameKind::Rescaled,
            t0: 1.0,
            t_end: 10.0,
            observations: vec![0.0, 1.0, 10.0],
            tail_radii: vec![1.0, 10.0],
        }
    }
}

impl EvolveBlock {
    pub fn frame(&self, exps: &ExponentSet) -> Frame {
        match self.frame {
            FrameKind::Physical => Frame::Physical,
            FrameKind::Rescaled => Frame::rescaled(exps),
            FrameKind::Diffusive => Frame::diffusive(exps, self.t0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub exponents: ExponentBlock,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    pub evolve: EvolveBlock,
    pub checks: Vec<String>,
    pub output: Option<PathBuf>,
    pub rng_seed: Option<u64>,
    pub experiments: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            exponents: ExponentBlock::default(),
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            initial: InitialCondition::Bump {
                height: 10.0,
                width: 1.0,
            },
            evolve: EvolveBlock::default(),
            checks: Vec::new(),
            output: None,
            rng_seed: None,
            experiments: ExperimentConfig::default(),
        }
    }
}

fn config_error(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Parses `key.path=value`, reading the value as a TOML literal and falling
/// back to a bare string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_error(spec, "override must look like section.key=value"))?;
    let key = key.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| config_error(parts[..i].join("."), "not a section"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(config_error(key, "empty key"))
}

impl RunConfig {
    /// File contents (if any) with overrides applied, then validated.
    pub fn load(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut root = match text {
            Some(t) => toml::from_str::<toml::Value>(t).map_err(|e| config_error("<file>", e.to_string()))?,
            None => toml::Value::Table(toml::Table::new()),
        };
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(root).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::load(Some(&text), overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.exps()?;
        self.solver.validate()?;
        for name in &self.checks {
            if !CHECKS.contains(&name.as_str()) {
                return Err(unknown_check(name));
            }
        }
        Ok(())
    }

    pub fn exps(&self) -> Result<ExponentSet> {
        let b = self.exponents;
        derive_exponents(b.p, b.q, b.n).map_err(|e| config_error("exponents", e.to_string()))
    }

    /// Experiment settings with the top-level seed applied.
    pub fn experiments(&self) -> ExperimentConfig {
        let mut c = self.experiments.clone();
        if let Some(seed) = self.rng_seed {
            c.vector.rng_seed = seed;
        }
        c
    }

    /// Explicit `output`, else the environment variable, else `vsslab-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("vsslab-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn file_and_overrides() {
        let text = "[exponents]\np = 1.5\nq = 0.8\nN = 1\n[solver]\ncfl_safety = 0.5\n";
        let c = RunConfig::load(Some(text), &["solver.cfl_safety=0.25".into(), "checks=[\"stationarity\"]".into()]).unwrap();
        assert_eq!(c.exponents.n, 1);
        assert_eq!(c.solver.cfl_safety, 0.25);
        assert_eq!(c.checks, vec!["stationarity".to_string()]);
    }

    #[test]
    fn type_errors_carry_the_field_path() {
        let err = RunConfig::load(Some("[solver]\neps_reg = \"small\"\n"), &[]).unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "solver.eps_reg"),
            e => panic!("{e}"),
        }
        let err = RunConfig::load(None, &["experiments.decay.rel_tol=x".into()]).unwrap_err();
        assert!(err.to_string().contains("experiments.decay.rel_tol"), "{err}");
    }

    #[test]
    fn unknown_fields_and_checks_are_rejected() {
        assert!(RunConfig::load(Some("[grid]\nhh = 1\n"), &[]).is_err());
        let err = RunConfig::load(None, &["checks=[\"bogus\"]".into()]).unwrap_err();
        assert!(err.to_string().contains("vector_inequality"));
    }

    #[test]
    fn inadmissible_exponents_are_config_errors() {
        let err = RunConfig::load(None, &["exponents.p=1.2".into(), "exponents.q=0.7".into()]).unwrap_err();
        assert!(err.to_string().contains("p_c = 4/3"), "{err}");
    }

    #[test]
    fn initial_condition_section() {
        let c = RunConfig::load(Some("[initial]\nkind = \"source\"\nmass = 2.0\nage = 0.01\n"), &[]).unwrap();
        assert_eq!(c.initial, InitialCondition::Source { mass: 2.0, age: 0.01 });
    }
}
