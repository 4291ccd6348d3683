//! Stabilization toward the self-similar profile in rescaled variables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{CheckReport, Measurement, Table};
use super::runs::{budget_exhausted, frame_times, run, GridConfig, Run};
use crate::error::Result;
use crate::params::ExponentSet;
use crate::profile::SelfSimilarSolution;
use crate::solver::{Frame, InitialCondition, Solver, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarityConfig {
    pub grid: GridConfig,
    pub s_end: f64,
    pub ds: f64,
    /// Allowed multiple of the scheme tolerance.
    pub factor: f64,
    pub refine: u32,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            s_end: 1.0,
            ds: 0.05,
            factor: 10.0,
            refine: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub grid: GridConfig,
    pub data: Vec<InitialCondition>,
    /// Also evolve the sampled profile itself, which must stay at the floor.
    pub include_profile: bool,
    pub s_start: f64,
    pub s_end: f64,
    pub ds: f64,
    /// Required `E(s_end) / E(s_start)`.
    pub reduction: f64,
    /// Fraction of the horizon, counted from its end, over which E must decrease.
    pub monotone_fraction: f64,
    pub refine: u32,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            data: vec![
                InitialCondition::Bump {
                    height: 100.0,
                    width: 1.0,
                },
                InitialCondition::TruncatedPower {
                    height: 100.0,
                    kappa: 100.0,
                    delta: 1.0,
                },
            ],
            include_profile: false,
            s_start: 1.0,
            s_end: 6.0,
            ds: 0.25,
            reduction: 0.1,
            monotone_fraction: 0.5,
            refine: 0,
        }
    }
}

/// The profile sampled on the nodes, as initial data.
pub fn sampled_profile(ss: &SelfSimilarSolution, solver: &Solver) -> (Vec<f64>, InitialCondition) {
    let f: Vec<f64> = solver.grid.nodes.iter().map(|&y| ss.profile_at(y)).collect();
    let u0 = InitialCondition::Sampled {
        r: solver.grid.nodes.clone(),
        u: f.clone(),
    };
    (f, u0)
}

/// `(s, E(s))` with `E = max_i |v_i − f_U(y_i)|`.
fn distance_history(run: &Run, f: &[f64]) -> Vec<(f64, f64)> {
    run.snapshots
        .iter()
        .map(|st| (st.s, st.u.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)))
        .collect()
}

fn rescaled_solver(exps: &ExponentSet, grid: &GridConfig, refine: u32, solver: SolverConfig) -> Result<Solver> {
    Solver::new(*exps, grid.build(exps.n, refine)?, solver, Frame::rescaled(exps))
}

/// `‖L_h f_U‖_∞` over one unit of frame time: the drift a steady state of the
/// continuous problem can accumulate on this grid.
pub fn scheme_tolerance(solver: &Solver, u0: &InitialCondition) -> Result<f64> {
    let st = solver.init_state(u0)?;
    Ok(solver.residual_norm(&st))
}

pub fn check_stationarity(
    exps: &ExponentSet,
    ss: &SelfSimilarSolution,
    cfg: &StationarityConfig,
    solver: SolverConfig,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("stationarity");
    report
        .param("exponents", exps)
        .param("grid", cfg.grid)
        .param("s_end", cfg.s_end)
        .param("factor", cfg.factor)
        .param("refine", cfg.refine);
    let s = rescaled_solver(exps, &cfg.grid, cfg.refine, solver)?;
    let (f, u0) = sampled_profile(ss, &s);
    let tol = scheme_tolerance(&s, &u0)? * cfg.s_end;
    report.push(Measurement::info("scheme_tolerance", tol).with_note("sup of the discrete residual times the horizon"));
    let r = match run(s, &u0, cfg.s_end, frame_times(cfg.s_end, cfg.ds), vec![], true) {
        Ok(r) => r,
        Err(e) if budget_exhausted(&e) => {
            report.inconclusive(e.to_string());
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let hist = distance_history(&r, &f);
    let worst = hist.iter().map(|x| x.1).fold(0.0, f64::max);
    report.push(Measurement::at_most("max_distance_to_profile", worst, cfg.factor * tol));
    report.push(Measurement::info("final_distance_to_profile", hist.last().map_or(0.0, |x| x.1)));
    let mut t = Table::new("distance", &["s", "E"]);
    for (s, e) in hist {
        t.push(vec![s, e]);
    }
    report.table(t);
    Ok(report)
}

pub fn check_convergence(
    exps: &ExponentSet,
    ss: &SelfSimilarSolution,
    cfg: &ConvergenceConfig,
    solver: SolverConfig,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("convergence");
    report
        .param("exponents", exps)
        .param("grid", cfg.grid)
        .param("data", &cfg.data)
        .param("include_profile", cfg.include_profile)
        .param("horizon", [cfg.s_start, cfg.s_end])
        .param("reduction", cfg.reduction)
        .param("refine", cfg.refine);
    report.note("the reduction factor over the horizon is a repository acceptance policy; the limit theorem gives no rate");
    let base = rescaled_solver(exps, &cfg.grid, cfg.refine, solver)?;
    let (f, profile_u0) = sampled_profile(ss, &base);
    let tol = scheme_tolerance(&base, &profile_u0)?;
    let times = frame_times(cfg.s_end, cfg.ds);
    // The profile's own drift is the noise floor for the monotonicity test.
    let mut jobs = vec![profile_u0.clone()];
    jobs.extend(cfg.data.iter().cloned());
    let runs: Vec<Result<Run>> = jobs
        .par_iter()
        .map(|u0| run(base.clone(), u0, cfg.s_end, times.clone(), vec![], true))
        .collect();
    let mut hists = Vec::new();
    for r in runs {
        match r {
            Ok(r) => {
                if r.contaminated() {
                    report.inconclusive("a run touched the outer boundary");
                }
                hists.push(distance_history(&r, &f));
            }
            Err(e) if budget_exhausted(&e) => {
                report.inconclusive(e.to_string());
                return Ok(report);
            }
            Err(e) => return Err(e),
        }
    }
    let floor = hists[0].iter().map(|x| x.1).fold(0.0, f64::max);
    report.push(Measurement::info("profile_drift_floor", floor));
    report.push(Measurement::info("scheme_tolerance", tol));
    let near = |s: f64, h: &[(f64, f64)]| {
        h.iter()
            .min_by(|a, b| (a.0 - s).abs().total_cmp(&(b.0 - s).abs()))
            .map_or(f64::NAN, |x| x.1)
    };
    if cfg.include_profile {
        let worst = hists[0]
            .iter()
            .filter(|x| x.0 > 0.0)
            .map(|x| x.1 / x.0.max(1.0))
            .fold(0.0, f64::max);
        report.push(
            Measurement::at_most("profile_distance_per_unit_s", worst, 10.0 * tol).with_note("sampled profile stays at the floor"),
        );
    }
    let mut table = Table {
        name: "distance".into(),
        columns: ["s".to_string(), "E_profile".to_string()]
            .into_iter()
            .chain((0..cfg.data.len()).map(|k| format!("E_datum{k}")))
            .collect(),
        rows: Vec::new(),
    };
    for i in 0..hists[0].len() {
        let mut row = vec![hists[0][i].0];
        row.extend(hists.iter().map(|h| h[i].1));
        table.push(row);
    }
    let split = cfg.s_end - cfg.monotone_fraction * (cfg.s_end - cfg.s_start);
    for (k, h) in hists.iter().enumerate().skip(1) {
        let (e0, e1) = (near(cfg.s_start, h), near(cfg.s_end, h));
        let name = format!("datum{}", k - 1);
        report.push(Measurement::at_most(format!("{name}_reduction"), e1 / e0, cfg.reduction).with_window([cfg.s_start, cfg.s_end]));
        report.push(Measurement::info(format!("{name}_E_start"), e0));
        report.push(Measurement::info(format!("{name}_E_end"), e1));
        let tail: Vec<f64> = h.iter().filter(|x| x.0 >= split - 1e-9).map(|x| x.1).collect();
        let rise = tail.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        report.push(
            Measurement::at_most(format!("{name}_max_rise_late"), rise, floor)
                .with_window([split, cfg.s_end])
                .with_note("eventual decrease within the profile drift floor"),
        );
    }
    report.table(table);
    Ok(report)
}
