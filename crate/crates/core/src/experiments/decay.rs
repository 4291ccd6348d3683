//! Late-time decay of the sup norm, mass and gradient.

use serde::{Deserialize, Serialize};

use super::report::{CheckReport, Measurement, Table};
use super::runs::{budget_exhausted, log_times, run, window, GridConfig, Run, SourceGrid};
use crate::barenblatt::Barenblatt;
use crate::error::Result;
use crate::fit::loglog_fit;
use crate::params::ExponentSet;
use crate::solver::{Frame, InitialCondition, Solver, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayCase {
    /// Data below the barrier with a faster tail: self-similar rates.
    Compliant,
    /// Integrable data with a tail fatter than the barrier: diffusive rate.
    FatTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub cases: Vec<DecayCase>,
    pub rel_tol: f64,
    pub refine: u32,
    pub grid: GridConfig,
    pub compliant: InitialCondition,
    /// Physical fit window.
    pub compliant_window: (f64, f64),
    pub observations: usize,
    pub fat_mass: f64,
    pub fat_theta: f64,
    /// Age of the source whose width the fat bump copies; also the frame origin.
    pub fat_age: f64,
    pub fat_grid: SourceGrid,
    pub fat_window: (f64, f64),
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            cases: vec![DecayCase::Compliant, DecayCase::FatTail],
            rel_tol: 0.1,
            refine: 0,
            grid: GridConfig::default(),
            compliant: InitialCondition::Bump {
                height: 10.0,
                width: 1.0,
            },
            compliant_window: (1e2, 1e5),
            observations: 61,
            fat_mass: 1.0,
            fat_theta: 2.5,
            fat_age: 1e-10,
            fat_grid: SourceGrid::default(),
            fat_window: (1e-8, 1e-5),
        }
    }
}

impl DecayConfig {
    /// Fat-tailed bump with the width of the source of the same mass at `fat_age`.
    pub fn fat_initial(&self, exps: &ExponentSet) -> Result<InitialCondition> {
        let b = Barenblatt::new(exps, self.fat_mass)?;
        Ok(InitialCondition::PowerBump {
            mass: self.fat_mass,
            width: b.width() * self.fat_age.powf(exps.eta),
            theta: self.fat_theta,
        })
    }
}

fn history(name: &str, run: &Run) -> Table {
    let mut t = Table::new(name, &["t", "sup_norm", "mass", "grad_sup_norm"]);
    for r in &run.log {
        t.push(vec![r.t, r.sup_norm, r.mass, r.grad_sup_norm]);
    }
    t
}

fn column(run: &Run, f: impl Fn(&crate::solver::LogRecord) -> f64) -> Vec<f64> {
    run.log.iter().map(f).collect()
}

fn compliant_run(exps: &ExponentSet, cfg: &DecayConfig, solver: SolverConfig) -> Result<Run> {
    let grid = cfg.grid.build(exps.n, cfg.refine)?;
    let frame = Frame::rescaled(exps);
    let (lo, hi) = cfg.compliant_window;
    let times = log_times(&frame, lo, hi, cfg.observations);
    let s_end = *times.last().unwrap();
    run(Solver::new(*exps, grid, solver, frame)?, &cfg.compliant, s_end, times, vec![], false)
}

fn fat_run(exps: &ExponentSet, cfg: &DecayConfig, solver: SolverConfig) -> Result<Run> {
    let b = Barenblatt::new(exps, cfg.fat_mass)?;
    let grid = cfg.fat_grid.build(exps.n, b.width(), cfg.refine)?;
    let frame = Frame::diffusive(exps, cfg.fat_age);
    let (lo, hi) = cfg.fat_window;
    let times = log_times(&frame, lo, hi, cfg.observations);
    let s_end = *times.last().unwrap();
    let u0 = cfg.fat_initial(exps)?;
    run(Solver::new(*exps, grid, solver, frame)?, &u0, s_end, times, vec![], false)
}

fn slope_measurement(
    report: &mut CheckReport,
    name: &str,
    t: &[f64],
    y: &[f64],
    expected: f64,
    cfg: &DecayConfig,
    win: (f64, f64),
) {
    let (x, y) = window(t, y, win.0, win.1);
    let fit = loglog_fit(&x, &y);
    report.push(Measurement::slope(name, &fit, expected, cfg.rel_tol, [win.0, win.1]));
    report.push(Measurement::info(format!("{name}_prefactor"), fit.intercept.exp()));
}

pub fn check_decay_rates(exps: &ExponentSet, cfg: &DecayConfig, solver: SolverConfig) -> Result<CheckReport> {
    let mut report = CheckReport::new("decay_rates");
    report
        .param("exponents", exps)
        .param("cases", &cfg.cases)
        .param("rel_tol", cfg.rel_tol)
        .param("refine", cfg.refine)
        .param("grid", cfg.grid)
        .param("compliant", &cfg.compliant)
        .param("compliant_window", [cfg.compliant_window.0, cfg.compliant_window.1])
        .param("fat_initial", cfg.fat_initial(exps)?)
        .param("fat_age", cfg.fat_age)
        .param("fat_grid", cfg.fat_grid)
        .param("fat_window", [cfg.fat_window.0, cfg.fat_window.1]);
    let want = |c| cfg.cases.contains(&c);
    let (a, b) = rayon::join(
        || want(DecayCase::Compliant).then(|| compliant_run(exps, cfg, solver)),
        || want(DecayCase::FatTail).then(|| fat_run(exps, cfg, solver)),
    );
    if let Some(res) = a {
        match res {
            Ok(run) => {
                if run.contaminated() {
                    report.inconclusive("compliant run touched the outer boundary");
                }
                let t = column(&run, |r| r.t);
                let w = cfg.compliant_window;
                slope_measurement(&mut report, "sup_norm_slope", &t, &column(&run, |r| r.sup_norm), -exps.alpha, cfg, w);
                slope_measurement(&mut report, "mass_slope", &t, &column(&run, |r| r.mass), -exps.mass_exponent(), cfg, w);
                slope_measurement(
                    &mut report,
                    "grad_sup_norm_slope",
                    &t,
                    &column(&run, |r| r.grad_sup_norm),
                    -(exps.alpha + exps.beta),
                    cfg,
                    w,
                );
                report.table(history("compliant", &run));
            }
            Err(e) if budget_exhausted(&e) => {
                report.inconclusive(format!("compliant run: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(res) = b {
        match res {
            Ok(run) => {
                if run.contaminated() {
                    report.inconclusive("fat-tail run touched the outer boundary");
                }
                let t = column(&run, |r| r.t);
                slope_measurement(
                    &mut report,
                    "fat_tail_sup_norm_slope",
                    &t,
                    &column(&run, |r| r.sup_norm),
                    -exps.nf() * exps.eta,
                    cfg,
                    cfg.fat_window,
                );
                report.table(history("fat_tail", &run));
            }
            Err(e) if budget_exhausted(&e) => {
                report.inconclusive(format!("fat-tail run: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    #[test]
    fn fat_bump_violates_the_barrier_margin() {
        let e = derive_exponents(1.6, 0.85, 2).unwrap();
        let u0 = DecayConfig::default().fat_initial(&e).unwrap();
        assert!(!u0.decays_faster_than_barrier(&e));
        assert!(DecayConfig::default().compliant.decays_faster_than_barrier(&e));
    }
}
