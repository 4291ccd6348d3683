//! Sensitivity of every fitted rate to halving the spatial step.

use rayon::prelude::*;

use super::decay::check_decay_rates;
use super::report::{CheckReport, Measurement};
use super::small_time::check_small_time;
use super::ExperimentConfig;
use crate::error::Result;
use crate::params::ExponentSet;
use crate::solver::SolverConfig;

/// Pairs every asserted slope of `coarse` with the same entry of `fine`;
/// the shift must stay below half the slope's tolerance.
pub fn compare(report: &mut CheckReport, coarse: &CheckReport, fine: &CheckReport, rel_tol: f64) {
    for m in coarse.measurements.iter().filter(|m| m.expected.is_some()) {
        let Some(f) = fine.measurement(&m.name) else {
            report.inconclusive(format!("{} missing from the refined run", m.name));
            continue;
        };
        let expected = m.expected.unwrap_or(0.0);
        let limit = 0.5 * rel_tol * expected.abs();
        report.push(
            Measurement::at_most(format!("{}_shift", m.name), (f.value - m.value).abs(), limit)
                .with_note(format!("coarse {:.5}, fine {:.5}", m.value, f.value)),
        );
    }
    if coarse.verdict == super::Verdict::Inconclusive || fine.verdict == super::Verdict::Inconclusive {
        report.inconclusive(format!("{} inconclusive at one resolution", coarse.name));
    }
}

/// Slope shifts when the diffusivity regularization is divided by ten; reported, not asserted.
pub fn eps_sensitivity(report: &mut CheckReport, base: &CheckReport, rerun: &CheckReport) {
    for m in base.measurements.iter().filter(|m| m.expected.is_some()) {
        if let Some(f) = rerun.measurement(&m.name) {
            report.push(Measurement::info(format!("{}_eps_shift", m.name), (f.value - m.value).abs()));
        }
    }
}

pub fn check_refinement(exps: &ExponentSet, cfg: &ExperimentConfig, solver: SolverConfig) -> Result<CheckReport> {
    let mut report = CheckReport::new("refinement");
    let decay = cfg.decay.clone();
    let small = cfg.small_time.clone();
    let mut fine_decay = decay.clone();
    fine_decay.refine += 1;
    let mut fine_small = small.clone();
    fine_small.refine += 1;
    let tight = SolverConfig {
        eps_reg: solver.eps_reg / 10.0,
        ..solver
    };
    report
        .param("exponents", exps)
        .param("base_refine", [decay.refine, small.refine])
        .param("fine_refine", [fine_decay.refine, fine_small.refine])
        .param("eps_reg", [solver.eps_reg, tight.eps_reg]);
    let jobs: [&(dyn Fn() -> Result<CheckReport> + Sync); 6] = [
        &|| check_decay_rates(exps, &decay, solver),
        &|| check_decay_rates(exps, &fine_decay, solver),
        &|| check_decay_rates(exps, &decay, tight),
        &|| check_small_time(exps, &small, solver),
        &|| check_small_time(exps, &fine_small, solver),
        &|| check_small_time(exps, &small, tight),
    ];
    let out: Vec<Result<CheckReport>> = jobs.par_iter().map(|f| f()).collect();
    let [d0, d1, de, s0, s1, se]: [CheckReport; 6] = out
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .try_into()
        .expect("six reports");
    compare(&mut report, &d0, &d1, decay.rel_tol);
    compare(&mut report, &s0, &s1, small.rel_tol);
    eps_sensitivity(&mut report, &d0, &de);
    eps_sensitivity(&mut report, &s0, &se);
    Ok(report)
}
