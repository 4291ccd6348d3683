//! Small-time gap between the absorbing and the purely diffusive evolutions.

use serde::{Deserialize, Serialize};

use super::report::{CheckReport, Measurement, Table};
use super::runs::{budget_exhausted, log_times, run, source_solver, window, SourceGrid};
use crate::error::Result;
use crate::fit::loglog_fit;
use crate::params::ExponentSet;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallTimeConfig {
    pub mass: f64,
    /// Age of the source used as common initial data.
    pub age: f64,
    pub grid: SourceGrid,
    /// Fit window in time since the source's origin.
    pub window: (f64, f64),
    pub observations: usize,
    pub rel_tol: f64,
    pub refine: u32,
}

impl Default for SmallTimeConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            age: 1e-12,
            grid: SourceGrid::default(),
            window: (1e-7, 1e-5),
            observations: 41,
            rel_tol: 0.15,
            refine: 0,
        }
    }
}

pub fn check_small_time(exps: &ExponentSet, cfg: &SmallTimeConfig, solver: SolverConfig) -> Result<CheckReport> {
    let mut report = CheckReport::new("small_time_diffusion_dominance");
    report
        .param("exponents", exps)
        .param("mass", cfg.mass)
        .param("age", cfg.age)
        .param("grid", cfg.grid)
        .param("window", [cfg.window.0, cfg.window.1])
        .param("rel_tol", cfg.rel_tol)
        .param("refine", cfg.refine);
    let on = SolverConfig {
        absorption_on: true,
        ..solver
    };
    let off = SolverConfig {
        absorption_on: false,
        ..solver
    };
    let (su, u0) = source_solver(exps, cfg.mass, cfg.age, &cfg.grid, cfg.refine, on)?;
    let (sv, _) = source_solver(exps, cfg.mass, cfg.age, &cfg.grid, cfg.refine, off)?;
    // Log-spaced physical times; with a tiny age, `τ = t + age ≈ t`.
    let times = log_times(&su.frame, cfg.window.0, cfg.window.1, cfg.observations);
    let s_end = *times.last().unwrap();
    let (ru, rv) = rayon::join(
        || run(su, &u0, s_end, times.clone(), vec![], true),
        || run(sv, &u0, s_end, times.clone(), vec![], true),
    );
    let (ru, rv) = match (ru, rv) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) if budget_exhausted(&e) => {
            report.inconclusive(format!("twin run: {e}"));
            return Ok(report);
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    if ru.contaminated() || rv.contaminated() {
        report.inconclusive("twin runs touched the outer boundary");
    }
    let mut table = Table::new("gap", &["tau", "l1_gap", "mass_on", "mass_off"]);
    let mut tau = Vec::new();
    let mut gap = Vec::new();
    let mut drift: f64 = 0.0;
    for ((a, b), (la, lb)) in ru.snapshots.iter().zip(&rv.snapshots).zip(ru.log.iter().zip(&rv.log)) {
        let d = ru.solver.l1_distance(a, b);
        let tt = ru.solver.frame.tau(a.s);
        table.push(vec![tt, d, la.mass, lb.mass]);
        tau.push(tt);
        gap.push(d);
        drift = drift.max((lb.mass - cfg.mass).abs());
    }
    // Conservation error of the diffusive twin is the scheme's L¹ floor.
    let floor = drift.max(f64::EPSILON * cfg.mass);
    report.push(Measurement::info("scheme_l1_tolerance", floor).with_note("mass drift of the diffusive twin"));
    let (x, y) = window(&tau, &gap, cfg.window.0, cfg.window.1);
    if y.iter().all(|&g| g < 10.0 * floor) {
        report.inconclusive("gap below 10x the scheme tolerance throughout the window");
    }
    let fit = loglog_fit(&x, &y);
    report.push(Measurement::slope(
        "l1_gap_slope",
        &fit,
        exps.small_time_exponent(),
        cfg.rel_tol,
        [cfg.window.0, cfg.window.1],
    ));
    report.push(Measurement::info("l1_gap_prefactor", fit.intercept.exp()));
    report.push(Measurement::holds(
        "gap_vanishes_as_t_to_0",
        gap.first().is_some_and(|&g0| gap.iter().all(|&g| g >= 0.0) && g0 <= *gap.last().unwrap()),
    ));
    report.table(table);
    Ok(report)
}
