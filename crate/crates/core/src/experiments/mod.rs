//! Verification harness: each check turns an estimate into measured slopes,
//! constants and a verdict.

pub mod analytic;
pub mod convergence;
pub mod decay;
pub mod fundamental;
pub mod refinement;
pub mod report;
pub mod runs;
pub mod small_time;
pub mod tails;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ExponentSet;
use crate::profile::{build_vss_profile, ProfileControl, SelfSimilarSolution};
use crate::solver::SolverConfig;

pub use report::{merge, overall, CheckReport, Measurement, Table, Verdict};

/// Every check name accepted by [`run_check`].
pub const CHECKS: &[&str] = &[
    "vector_inequality",
    "barrier_supersolution",
    "decay_rates",
    "tail_bounds",
    "small_time_diffusion_dominance",
    "fundamental_scaling",
    "vss_diagnostics",
    "torsion_barrier",
    "stationarity",
    "convergence",
    "refinement",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Shooting tolerance for the profile used by the evolution checks.
    pub profile_tol: f64,
    pub vector: analytic::VectorConfig,
    pub barrier: analytic::BarrierConfig,
    pub decay: decay::DecayConfig,
    pub small_time: small_time::SmallTimeConfig,
    pub tails: tails::TailConfig,
    pub fundamental: fundamental::FundamentalConfig,
    pub torsion: tails::TorsionConfig,
    pub stationarity: convergence::StationarityConfig,
    pub convergence: convergence::ConvergenceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile_tol: 1e-8,
            vector: Default::default(),
            barrier: Default::default(),
            decay: Default::default(),
            small_time: Default::default(),
            tails: Default::default(),
            fundamental: Default::default(),
            torsion: Default::default(),
            stationarity: Default::default(),
            convergence: Default::default(),
        }
    }
}

/// Exponents, solver settings and check settings, with the profile built once on demand.
pub struct Context {
    pub exps: ExponentSet,
    pub solver: SolverConfig,
    pub config: ExperimentConfig,
    profile: OnceLock<std::result::Result<SelfSimilarSolution, String>>,
}

impl Context {
    pub fn new(exps: ExponentSet, solver: SolverConfig, config: ExperimentConfig) -> Self {
        Self {
            exps,
            solver,
            config,
            profile: OnceLock::new(),
        }
    }

    pub fn profile(&self) -> Result<&SelfSimilarSolution> {
        let ctrl = ProfileControl {
            side_probes: 0,
            ..ProfileControl::default()
        };
        self.profile
            .get_or_init(|| build_vss_profile(&self.exps, self.config.profile_tol, &ctrl).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Inconclusive(format!("profile construction failed: {e}")))
    }
}

pub fn unknown_check(name: &str) -> Error {
    Error::Config {
        path: "checks".into(),
        msg: format!("unknown check `{name}`; available: {}", CHECKS.join(", ")),
    }
}

pub fn run_check(ctx: &Context, name: &str) -> Result<CheckReport> {
    let (e, c, s) = (&ctx.exps, &ctx.config, ctx.solver);
    match name {
        "vector_inequality" => Ok(analytic::check_vector_inequality(e.p, e.q, &c.vector)),
        "barrier_supersolution" => analytic::check_barrier_supersolution(&c.barrier),
        "decay_rates" => decay::check_decay_rates(e, &c.decay, s),
        "tail_bounds" => tails::check_tail_bounds(e, &c.tails, s),
        "small_time_diffusion_dominance" => small_time::check_small_time(e, &c.small_time, s),
        "fundamental_scaling" => fundamental::check_fundamental_scaling(e, ctx.profile()?, &c.fundamental, s),
        "vss_diagnostics" => {
            fundamental::check_vss_diagnostics(e, ctx.profile()?, &c.fundamental, s, c.tails.time_rel_tol)
        }
        "torsion_barrier" => tails::check_torsion_barrier(e, &c.torsion, s),
        "stationarity" => convergence::check_stationarity(e, ctx.profile()?, &c.stationarity, s),
        "convergence" => convergence::check_convergence(e, ctx.profile()?, &c.convergence, s),
        "refinement" => refinement::check_refinement(e, c, s),
        other => Err(unknown_check(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_check_lists_the_names() {
        let ctx = Context::new(
            crate::derive_exponents(1.6, 0.85, 2).unwrap(),
            SolverConfig::default(),
            ExperimentConfig::default(),
        );
        let err = run_check(&ctx, "nope").unwrap_err().to_string();
        assert!(err.contains("vector_inequality") && err.contains("convergence"));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
    }
}
