//! Shared evolution plumbing for the checks: grids, frames and recorded runs.

use serde::{Deserialize, Serialize};

use crate::barenblatt::Barenblatt;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::ExponentSet;
use crate::solver::{Frame, InitialCondition, LogRecord, Observers, RadialState, Solver, SolverConfig};

/// Geometric grid `dr = max(h, stretch·r)` up to `r_max`, in frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub stretch: f64,
    pub r_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            h: 0.02,
            stretch: 0.02,
            r_max: 1e4,
        }
    }
}

impl GridConfig {
    /// Both spacings divided by `2^refine`.
    pub fn build(&self, n: u32, refine: u32) -> Result<RadialGrid> {
        let f = 0.5f64.powi(refine as i32);
        RadialGrid::graded(n, self.h * f, self.stretch * f, self.r_max)
    }
}

/// Grid measured in units of a source profile width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceGrid {
    pub cells_per_width: f64,
    /// Outer radius in widths.
    pub extent: f64,
}

impl Default for SourceGrid {
    fn default() -> Self {
        Self {
            cells_per_width: 25.0,
            extent: 1e4,
        }
    }
}

impl SourceGrid {
    pub fn build(&self, n: u32, width: f64, refine: u32) -> Result<RadialGrid> {
        let c = self.cells_per_width * 2f64.powi(refine as i32);
        RadialGrid::graded(n, width / c, 1.0 / c, width * self.extent)
    }
}

/// Diffusive-frame solver started at the source's age, so the frame profile
/// at `s = 0` has the width of the unit-age source.
pub fn source_solver(
    exps: &ExponentSet,
    mass: f64,
    age: f64,
    grid: &SourceGrid,
    refine: u32,
    config: SolverConfig,
) -> Result<(Solver, InitialCondition)> {
    let b = Barenblatt::new(exps, mass)?;
    let g = grid.build(exps.n, b.width(), refine)?;
    let solver = Solver::new(*exps, g, config, Frame::diffusive(exps, age))?;
    Ok((solver, InitialCondition::Source { mass, age }))
}

pub struct Run {
    pub solver: Solver,
    pub log: Vec<LogRecord>,
    /// States at the observation times, when requested.
    pub snapshots: Vec<RadialState>,
    pub last: RadialState,
}

impl Run {
    pub fn contaminated(&self) -> bool {
        self.log.iter().any(|r| r.contaminated)
    }
}

/// Evolves to `s_end`, recording at `times` (frame) and `tail_radii` (physical).
pub fn run(
    solver: Solver,
    u0: &InitialCondition,
    s_end: f64,
    times: Vec<f64>,
    tail_radii: Vec<f64>,
    keep: bool,
) -> Result<Run> {
    let mut state = solver.init_state(u0)?;
    let observers = Observers { times, tail_radii };
    let mut snapshots = Vec::new();
    let mut log = Vec::new();
    if observers.times.contains(&0.0) {
        log.push(solver.record(&state, &observers.tail_radii));
        if keep {
            snapshots.push(state.clone());
        }
    }
    let (last, rest) = solver.evolve_until(state.clone(), s_end, &observers, &mut |st, _| {
        if keep {
            snapshots.push(st.clone());
        }
    })?;
    log.extend(rest);
    state = last;
    Ok(Run {
        solver,
        log,
        snapshots,
        last: state,
    })
}

/// Frame times of `count` log-spaced physical times in `[t_lo, t_hi]`.
pub fn log_times(frame: &Frame, t_lo: f64, t_hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (t_lo.ln(), t_hi.ln());
    (0..count)
        .map(|i| frame.frame_time((a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp()))
        .collect()
}

/// Evenly spaced frame times `0, ds, 2ds, …, s_end`.
pub fn frame_times(s_end: f64, ds: f64) -> Vec<f64> {
    let n = (s_end / ds).round() as usize;
    (0..=n).map(|i| i as f64 * ds).collect()
}

/// Whether an error means the run ran out of budget rather than failed.
pub fn budget_exhausted(e: &Error) -> bool {
    matches!(e, Error::StepBudget { .. } | Error::Stability { .. })
}

/// Picks `(x, y)` with `x` in `[lo, hi]`.
pub fn window(x: &[f64], y: &[f64], lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter(|(a, _)| **a >= lo * (1.0 - 1e-6) && **a <= hi * (1.0 + 1e-6))
        .map(|(a, b)| (*a, *b))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_exponents;

    #[test]
    fn refinement_halves_spacing() {
        let g = GridConfig::default();
        let a = g.build(2, 0).unwrap();
        let b = g.build(2, 1).unwrap();
        assert!((a.nodes[1] - 0.02).abs() < 1e-15);
        assert!((b.nodes[1] - 0.01).abs() < 1e-15);
        assert!(b.len() > a.len() * 19 / 10);
    }

    #[test]
    fn source_run_keeps_its_mass_without_absorption() {
        let e = derive_exponents(1.6, 0.85, 2).unwrap();
        let cfg = SolverConfig {
            absorption_on: false,
            ..SolverConfig::default()
        };
        let grid = SourceGrid {
            cells_per_width: 10.0,
            extent: 1e3,
        };
        let (solver, u0) = source_solver(&e, 2.0, 1e-3, &grid, 0, cfg).unwrap();
        let r = run(solver, &u0, 1.0, vec![0.0, 0.5, 1.0], vec![], true).unwrap();
        assert_eq!(r.snapshots.len(), 3);
        for rec in &r.log {
            assert!((rec.mass - 2.0).abs() < 2e-2, "{}", rec.mass);
        }
    }

    #[test]
    fn log_times_span_the_window() {
        let f = Frame::diffusive(&derive_exponents(1.6, 0.85, 2).unwrap(), 1e-3);
        let s = log_times(&f, 1e-2, 1.0, 5);
        assert!((f.physical_time(s[0]) - 1e-2).abs() < 1e-12);
        assert!((f.physical_time(s[4]) - 1.0).abs() < 1e-12);
    }
}
