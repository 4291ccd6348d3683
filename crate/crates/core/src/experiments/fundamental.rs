//! Fundamental solutions approximated by young sources: mass monotonicity,
//! the scaling law, and the approach to the very singular solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{CheckReport, Measurement, Table};
use super::runs::{budget_exhausted, run, source_solver, GridConfig, Run, SourceGrid};
use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::params::{friendly_giant, ExponentSet};
use crate::profile::{eval_u, SelfSimilarSolution};
use crate::solver::{Frame, InitialCondition, RadialState, Solver, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FundamentalConfig {
    pub masses: Vec<f64>,
    /// Age of the source standing in for the Dirac mass.
    pub age: f64,
    pub t_obs: f64,
    pub lambda: f64,
    pub scaling_mass: f64,
    pub grid: SourceGrid,
    /// Comparison tolerance relative to the sup of the compared profile.
    pub tol: f64,
    /// Mass whose gap to `U` at `t_obs` is read off the scaling law.
    pub far_mass: f64,
    /// Largest admitted `‖u_M − U‖_∞ / U(t_obs, 0)` at `far_mass`.
    pub gap_threshold: f64,
    /// Physical times (besides `t_obs`) for the trace diagnostics.
    pub early_times: Vec<f64>,
    pub radii: Vec<f64>,
    pub refine: u32,
    /// Grid of the `(α, β)` continuation that carries the largest mass to the far time.
    pub far_grid: GridConfig,
}

impl Default for FundamentalConfig {
    fn default() -> Self {
        Self {
            masses: vec![1.0, 4.0, 16.0, 64.0],
            age: 1e-6,
            t_obs: 1.0,
            lambda: 0.5,
            scaling_mass: 16.0,
            grid: SourceGrid::default(),
            tol: 0.03,
            far_mass: 1e10,
            gap_threshold: 0.5,
            early_times: vec![1e-4, 1e-3, 1e-2, 1e-1],
            radii: vec![0.5, 1.0, 2.0],
            refine: 0,
            far_grid: GridConfig::default(),
        }
    }
}

impl FundamentalConfig {
    /// Age of the source with half the width.
    pub fn halved_age(&self, exps: &ExponentSet) -> f64 {
        self.age * 0.5f64.powf(1.0 / exps.eta)
    }

    /// Time at which the largest configured mass stands in for `far_mass` at `t_obs`.
    pub fn far_time(&self, exps: &ExponentSet) -> f64 {
        let m = self.masses.last().copied().unwrap_or(1.0);
        self.t_obs * (self.far_mass / m).powf(1.0 / exps.mass_exponent())
    }
}

struct Family {
    /// One run per configured mass, observed at the early times and `t_obs`.
    by_mass: Vec<Run>,
    /// `(mass M at λ t_obs, mass λ^{α−Nβ} M at t_obs)`.
    scaling: (Run, Run),
}

fn at(run: &Run, t: f64) -> Option<&RadialState> {
    run.snapshots
        .iter()
        .find(|st| (run.solver.frame.physical_time(st.s) / t - 1.0).abs() < 1e-9)
}

fn family(exps: &ExponentSet, cfg: &FundamentalConfig, age: f64, solver: SolverConfig) -> Result<Family> {
    let lam = cfg.lambda;
    let scaled = lam.powf(exps.mass_exponent()) * cfg.scaling_mass;
    let mut jobs: Vec<(f64, f64)> = cfg.masses.iter().map(|&m| (m, cfg.t_obs)).collect();
    jobs.push((cfg.scaling_mass, lam * cfg.t_obs));
    jobs.push((scaled, cfg.t_obs));
    let runs: Vec<Result<Run>> = jobs
        .par_iter()
        .map(|&(m, t_end)| {
            let (s, u0) = source_solver(exps, m, age, &cfg.grid, cfg.refine, solver)?;
            let mut times: Vec<f64> = cfg.early_times.iter().cloned().filter(|&t| t < t_end).collect();
            times.push(t_end);
            let times: Vec<f64> = times.iter().map(|&t| s.frame.frame_time(t)).collect();
            let s_end = *times.last().unwrap();
            run(s, &u0, s_end, times, cfg.radii.clone(), true)
        })
        .collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let b = runs.pop().unwrap();
    let a = runs.pop().unwrap();
    Ok(Family {
        by_mass: runs,
        scaling: (a, b),
    })
}

/// `max_r |λ^α u_A(λ t, λ^β r) − u_B(t, r)| / max u_B(t)` on the nodes of `B`.
fn scaling_gap(exps: &ExponentSet, cfg: &FundamentalConfig, f: &Family) -> Result<f64> {
    let (ra, rb) = &f.scaling;
    let lam = cfg.lambda;
    let sa = at(ra, lam * cfg.t_obs).ok_or_else(|| Error::Inconclusive("scaling run missed its time".into()))?;
    let sb = at(rb, cfg.t_obs).ok_or_else(|| Error::Inconclusive("scaling run missed its time".into()))?;
    let radii = rb.solver.physical_radii(sb);
    let mut top: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for r in radii {
        let ub = rb.solver.physical_value(sb, r);
        let ua = lam.powf(exps.alpha) * ra.solver.physical_value(sa, lam.powf(exps.beta) * r);
        top = top.max(ub);
        gap = gap.max((ua - ub).abs());
    }
    Ok(gap / top)
}

/// Largest relative excess `(u_{M_k} − u_{M_{k+1}})⁺ / max u_{M_{k+1}}` over consecutive masses.
fn monotonicity_excess(cfg: &FundamentalConfig, f: &Family) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in f.by_mass.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let (sl, sh) = match (at(lo, cfg.t_obs), at(hi, cfg.t_obs)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Inconclusive("mass run missed t_obs".into())),
        };
        let mut top: f64 = 0.0;
        let mut excess: f64 = 0.0;
        for r in hi.solver.physical_radii(sh).into_iter().chain(lo.solver.physical_radii(sl)) {
            let a = lo.solver.physical_value(sl, r);
            let b = hi.solver.physical_value(sh, r);
            top = top.max(b);
            excess = excess.max(a - b);
        }
        worst = worst.max(excess / top);
    }
    Ok(worst)
}

/// `‖u_M(t_obs) − U(t_obs)‖_∞ / U(t_obs, 0)` for each mass.
fn gaps_to_vss(ss: &SelfSimilarSolution, cfg: &FundamentalConfig, f: &Family) -> Result<Vec<f64>> {
    let u0 = eval_u(ss, cfg.t_obs, 0.0)?;
    f.by_mass
        .iter()
        .map(|run| {
            let st = at(run, cfg.t_obs).ok_or_else(|| Error::Inconclusive("mass run missed t_obs".into()))?;
            let mut gap: f64 = 0.0;
            for r in run.solver.physical_radii(st) {
                gap = gap.max((run.solver.physical_value(st, r) - eval_u(ss, cfg.t_obs, r)?).abs());
            }
            Ok(gap / u0)
        })
        .collect()
}

fn families(
    exps: &ExponentSet,
    cfg: &FundamentalConfig,
    solver: SolverConfig,
    report: &mut CheckReport,
) -> Result<Option<(Family, Family)>> {
    let (a, b) = rayon::join(
        || family(exps, cfg, cfg.age, solver),
        || family(exps, cfg, cfg.halved_age(exps), solver),
    );
    match (a, b) {
        (Ok(a), Ok(b)) => {
            if a.by_mass.iter().chain(b.by_mass.iter()).any(|r| r.contaminated()) {
                report.inconclusive("a source run touched the outer boundary");
            }
            Ok(Some((a, b)))
        }
        (Err(e), _) | (_, Err(e)) if budget_exhausted(&e) => {
            report.inconclusive(format!("source run: {e}"));
            Ok(None)
        }
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

fn common_params(report: &mut CheckReport, exps: &ExponentSet, cfg: &FundamentalConfig) {
    report
        .param("exponents", exps)
        .param("masses", &cfg.masses)
        .param("age", cfg.age)
        .param("halved_width_age", cfg.halved_age(exps))
        .param("t_obs", cfg.t_obs)
        .param("grid", cfg.grid)
        .param("tol", cfg.tol)
        .param("refine", cfg.refine);
}

fn sensitivity(report: &mut CheckReport, name: &str, a: f64, b: f64, tol: f64) {
    let d = (a - b).abs();
    report.push(Measurement::info(format!("{name}_width_sensitivity"), d));
    if d > tol {
        report.inconclusive(format!("{name} moved by {d:.3e} when the source width was halved"));
    }
}

pub fn check_fundamental_scaling(
    exps: &ExponentSet,
    ss: &SelfSimilarSolution,
    cfg: &FundamentalConfig,
    solver: SolverConfig,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("fundamental_scaling");
    common_params(&mut report, exps, cfg);
    report
        .param("lambda", cfg.lambda)
        .param("scaling_mass", cfg.scaling_mass)
        .param("scaled_mass", cfg.lambda.powf(exps.mass_exponent()) * cfg.scaling_mass);
    let Some((fa, fb)) = families(exps, cfg, solver, &mut report)? else {
        return Ok(report);
    };
    let mono = [monotonicity_excess(cfg, &fa)?, monotonicity_excess(cfg, &fb)?];
    report.push(Measurement::at_most("mass_monotonicity_excess", mono[0], cfg.tol));
    sensitivity(&mut report, "mass_monotonicity_excess", mono[0], mono[1], cfg.tol);
    let sc = [scaling_gap(exps, cfg, &fa)?, scaling_gap(exps, cfg, &fb)?];
    report.push(Measurement::at_most("scaling_relative_gap", sc[0], cfg.tol));
    sensitivity(&mut report, "scaling_relative_gap", sc[0], sc[1], cfg.tol);
    let gaps = gaps_to_vss(ss, cfg, &fa)?;
    let gaps_h = gaps_to_vss(ss, cfg, &fb)?;
    let mut table = Table::new("gap_to_vss", &["mass", "relative_gap", "relative_gap_halved_width"]);
    for (i, m) in cfg.masses.iter().enumerate() {
        table.push(vec![*m, gaps[i], gaps_h[i]]);
    }
    report.table(table);
    report.push(Measurement::holds(
        "gap_to_vss_decreasing_in_mass",
        gaps.windows(2).all(|w| w[1] < w[0]),
    ));
    report.push(Measurement::info("gap_to_vss_at_largest_mass", *gaps.last().unwrap()));
    Ok(report)
}

/// Restarts `run` at `t_obs` in `(α, β)` variables and evolves it to `t_end`.
fn continue_rescaled(exps: &ExponentSet, cfg: &FundamentalConfig, base: &Run, t_end: f64, solver: SolverConfig) -> Result<Run> {
    let st = at(base, cfg.t_obs).ok_or_else(|| Error::Inconclusive("mass run missed t_obs".into()))?;
    let r = base.solver.physical_radii(st);
    let u: Vec<f64> = r.iter().map(|&x| base.solver.physical_value(st, x)).collect();
    let frame = Frame::rescaled_from(exps, cfg.t_obs);
    let s = Solver::new(*exps, cfg.far_grid.build(exps.n, cfg.refine)?, solver, frame)?;
    let s_end = (t_end / cfg.t_obs).ln();
    run(s, &InitialCondition::Sampled { r, u }, s_end, vec![s_end], Vec::new(), true)
}

pub fn check_vss_diagnostics(
    exps: &ExponentSet,
    ss: &SelfSimilarSolution,
    cfg: &FundamentalConfig,
    solver: SolverConfig,
    tail_rel_tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("vss_diagnostics");
    common_params(&mut report, exps, cfg);
    report
        .param("early_times", &cfg.early_times)
        .param("radii", &cfg.radii)
        .param("far_mass", cfg.far_mass)
        .param("far_time", cfg.far_time(exps))
        .param("gap_threshold", cfg.gap_threshold);
    let Some((fa, fb)) = families(exps, cfg, solver, &mut report)? else {
        return Ok(report);
    };
    let t0 = cfg.early_times.first().copied().unwrap_or(cfg.t_obs);
    let mut cores = Table::new("core_mass", &["mass", "r", "t", "core_mass", "tail_mass"]);
    // Core mass at the earliest time grows with M without saturating.
    for (j, &r) in cfg.radii.iter().enumerate() {
        let core: Vec<f64> = fa
            .by_mass
            .iter()
            .map(|run| {
                let rec = &run.log[0];
                rec.mass - rec.tail_masses[j].unwrap_or(0.0)
            })
            .collect();
        let growth_ok = cfg
            .masses
            .windows(2)
            .zip(core.windows(2))
            .all(|(m, c)| c[1] / c[0] >= 0.5 * m[1] / m[0]);
        report.push(
            Measurement::holds(format!("core_mass_grows_with_mass(r={r})"), growth_ok)
                .with_note(format!("at t = {t0:e}")),
        );
        for (run, m) in fa.by_mass.iter().zip(&cfg.masses) {
            for rec in &run.log {
                cores.push(vec![*m, r, rec.t, rec.mass - rec.tail_masses[j].unwrap_or(0.0), rec.tail_masses[j].unwrap_or(0.0)]);
            }
        }
    }
    // Mass outside each ball vanishes as t → 0, uniformly in M.
    for (j, &r) in cfg.radii.iter().enumerate() {
        let times: Vec<f64> = fa.by_mass[0].log.iter().map(|x| x.t).collect();
        let sup: Vec<f64> = (0..times.len())
            .map(|k| {
                fa.by_mass
                    .iter()
                    .map(|run| run.log[k].tail_masses[j].unwrap_or(0.0))
                    .fold(0.0, f64::max)
            })
            .collect();
        let early: Vec<(f64, f64)> = times
            .iter()
            .zip(&sup)
            .filter(|(t, _)| **t < cfg.t_obs * 0.99)
            .map(|(a, b)| (*a, *b))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = early.into_iter().unzip();
        let monotone = y.windows(2).all(|w| w[0] <= w[1]);
        report.push(Measurement::holds(format!("uniform_tail_mass_increasing_in_t(r={r})"), monotone));
        let fit = loglog_fit(&x, &y);
        let bound = (1.0 - tail_rel_tol) / exps.p;
        report.push(
            Measurement::at_least(format!("uniform_tail_mass_slope(r={r})"), fit.slope, bound)
                .with_window([x[0], *x.last().unwrap()])
                .with_note("vanishing at least like t^(1/p)"),
        );
    }
    // Below the barrier everywhere.
    let mut worst: f64 = 0.0;
    for run in &fa.by_mass {
        for st in &run.snapshots {
            for (i, r) in run.solver.physical_radii(st).into_iter().enumerate() {
                if r > 0.0 {
                    let u = run.solver.frame.value(st.s, st.u[i]);
                    worst = worst.max(u / friendly_giant(exps, r)?);
                }
            }
        }
    }
    report.push(Measurement::at_most("max_ratio_to_barrier", worst, 1.0 + cfg.tol));
    let gaps = gaps_to_vss(ss, cfg, &fa)?;
    let gaps_h = gaps_to_vss(ss, cfg, &fb)?;
    report.push(Measurement::holds(
        "increases_toward_vss",
        gaps.windows(2).all(|w| w[1] < w[0]) && monotonicity_excess(cfg, &fa)? <= cfg.tol,
    ));
    let last = *gaps.last().unwrap();
    report.push(Measurement::info("gap_to_vss_at_largest_mass", last));
    sensitivity(&mut report, "gap_to_vss_at_largest_mass", last, *gaps_h.last().unwrap(), cfg.tol);
    // u_M(t_obs) = k^α u_m(k t_obs, k^β ·) with k = (M/m)^{1/(α−Nβ)}, and U is invariant.
    let m = *cfg.masses.last().unwrap();
    let t_far = cfg.far_time(exps);
    let far = continue_rescaled(exps, cfg, fa.by_mass.last().unwrap(), t_far, solver);
    match far {
        Ok(far) => {
            if far.contaminated() {
                report.inconclusive("the far-mass run touched the outer boundary");
            }
            let st = &far.last;
            let mut gap: f64 = 0.0;
            for r in far.solver.physical_radii(st) {
                gap = gap.max((far.solver.physical_value(st, r) - eval_u(ss, t_far, r)?).abs());
            }
            let gap = gap / eval_u(ss, t_far, 0.0)?;
            report.push(
                Measurement::at_most("gap_to_vss_at_far_mass", gap, cfg.gap_threshold)
                    .with_note(format!("mass {:e} at t_obs, from mass {m} at t = {t_far:.4}", cfg.far_mass)),
            );
        }
        Err(e) if budget_exhausted(&e) => {
            report.inconclusive(format!("far-mass run: {e}"));
        }
        Err(e) => return Err(e),
    }
    report.table(cores);
    Ok(report)
}
