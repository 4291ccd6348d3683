//! Self-similar profile ODE, shooting classification and the threshold profile `f_U`.
//!
//! The profile satisfies `w' + (N−1)w/r + αf + βr f' − |f'|^q = 0` with
//! `w = |f'|^{p−2} f'`. It is integrated in `τ = ln r` for the state
//! `(f, w/r)`, which is regular at the origin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::ode::{integrate, DenseStep, OdeSystem, Stop, StepControl};
use crate::params::ExponentSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileTag {
    CrossesZero { r_hit: f64, slope_at_hit: f64 },
    PositiveDecaying,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrajectory {
    pub a: f64,
    pub grid: Vec<f64>,
    pub f: Vec<f64>,
    pub fprime: Vec<f64>,
    pub flux: Vec<f64>,
    pub tag: ProfileTag,
    /// Radius where the numerical integration starts from the series.
    pub r_start: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileControl {
    pub rtol: f64,
    pub atol: f64,
    /// Series start radius in units of the core width `ℓ(a)`.
    pub r0_factor: f64,
    pub r_max: f64,
    pub max_doublings: u32,
    pub tol_slope: f64,
    /// Sampling step in `ln r` for stored trajectories.
    pub sample_dtau: f64,
    /// Radius budget for shooting probes.
    pub probe_r_max: f64,
    /// Probes may commit to the upper side only beyond this many core widths.
    pub commit_factor: f64,
    pub bracket: (f64, f64),
    pub bracket_expansions: u32,
    pub side_probes: usize,
    /// Relative agreement of the two bracketing trajectories that defines the trusted range.
    pub agreement: f64,
    pub profile_r_cap: f64,
    pub min_fit_points: usize,
}

impl Default for ProfileControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            r0_factor: 1e-6,
            r_max: 50.0,
            max_doublings: 12,
            tol_slope: 0.05,
            sample_dtau: 1e-3,
            probe_r_max: 1e14,
            commit_factor: 1e3,
            bracket: (1.0, 10.0),
            bracket_expansions: 30,
            side_probes: 20,
            agreement: 1e-6,
            profile_r_cap: 1e6,
            min_fit_points: 50,
        }
    }
}

impl ProfileControl {
    fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.rtol,
            atol: self.atol,
            h_init: 1e-3,
            h_min: 1e-13,
            h_max: 0.1,
            max_steps: 5_000_000,
        }
    }
}

fn phi(w: f64, p: f64) -> f64 {
    w.signum() * w.abs().powf(1.0 / (p - 1.0))
}

/// Width of the profile core for a given height: the radius where the
/// leading series correction becomes comparable to `a`.
pub fn core_width(exps: &ExponentSet, a: f64) -> f64 {
    a.powf((exps.p - 2.0) / exps.p) * (exps.nf() / exps.alpha).powf(1.0 / exps.p)
}

struct ProfileOde {
    p: f64,
    q: f64,
    nf: f64,
    alpha: f64,
    beta: f64,
    k: f64,
    scale: f64,
    width: f64,
}

impl ProfileOde {
    fn new(exps: &ExponentSet, a: f64) -> Self {
        Self {
            p: exps.p,
            q: exps.q,
            nf: exps.nf(),
            alpha: exps.alpha,
            beta: exps.beta,
            k: exps.tail_profile_exp,
            scale: a,
            width: core_width(exps, a),
        }
    }
}

impl OdeSystem<2> for ProfileOde {
    fn rhs(&self, tau: f64, y: &[f64; 2]) -> [f64; 2] {
        let r = tau.exp();
        let fp = phi(r * y[1], self.p);
        [
            r * fp,
            -self.nf * y[1] - self.alpha * y[0] - self.beta * r * fp + fp.abs().powf(self.q),
        ]
    }

    fn atol(&self, tau: f64, _y: &[f64; 2]) -> [f64; 2] {
        let r = tau.exp();
        let m = self.scale * (r / self.width).powf(-self.k).min(1.0);
        [m, m * self.alpha / self.nf]
    }
}

fn series_start(exps: &ExponentSet, a: f64, r0: f64) -> Result<[f64; 2]> {
    let (p, nf, alpha) = (exps.p, exps.nf(), exps.alpha);
    let c = (p - 1.0) / p * (alpha * a / nf).powf(1.0 / (p - 1.0));
    let drop = c * r0.powf(p / (p - 1.0));
    let f0 = a - drop;
    let fp = -(alpha * a * r0 / nf).powf(1.0 / (p - 1.0));
    let neglected = (fp.abs().powf(exps.q) + exps.beta * r0 * fp.abs()) / (alpha * a);
    if !(f0 > 0.0) || drop > 1e-6 * a || neglected > 1e-6 || !f0.is_finite() {
        return Err(Error::SeriesStart(format!(
            "a = {a}, r0 = {r0:e}: relative drop {:e}, neglected terms {neglected:e}",
            drop / a
        )));
    }
    Ok([f0, -alpha * a / nf])
}

struct Recorder {
    p: f64,
    dtau: f64,
    tau0: f64,
    next: usize,
    grid: Vec<f64>,
    f: Vec<f64>,
    fprime: Vec<f64>,
    flux: Vec<f64>,
}

impl Recorder {
    fn new(p: f64, tau0: f64, dtau: f64, a: f64) -> Self {
        Self {
            p,
            dtau,
            tau0,
            next: 0,
            grid: vec![0.0],
            f: vec![a],
            fprime: vec![0.0],
            flux: vec![0.0],
        }
    }

    fn push(&mut self, tau: f64, y: &[f64; 2]) {
        let r = tau.exp();
        let w = r * y[1];
        self.grid.push(r);
        self.f.push(y[0]);
        self.fprime.push(phi(w, self.p));
        self.flux.push(w);
    }

    fn record(&mut self, step: &DenseStep<2>, t_stop: f64) {
        loop {
            let tau = self.tau0 + self.next as f64 * self.dtau;
            if tau > t_stop || tau > step.t1() {
                break;
            }
            self.push(tau, &step.eval(tau));
            self.next += 1;
        }
    }

    fn finish(&mut self, tau: f64, y: &[f64; 2]) {
        let r = tau.exp();
        if r > *self.grid.last().unwrap() * (1.0 + 1e-12) {
            self.push(tau, y);
        }
    }
}

fn run_stored(
    exps: &ExponentSet,
    a: f64,
    r0: f64,
    r_end: f64,
    ctrl: &ProfileControl,
) -> Result<(ProfileTrajectory, f64)> {
    let y0 = series_start(exps, a, r0)?;
    let sys = ProfileOde::new(exps, a);
    let tau0 = r0.ln();
    let tau_end = r_end.ln();
    let mut rec = Recorder::new(exps.p, tau0, ctrl.sample_dtau, a);
    let g = |_t: f64, y: &[f64; 2]| y[0];
    let out = {
        let mut obs = |s: &DenseStep<2>| {
            rec.record(s, tau_end);
            true
        };
        // The event step is recorded up to its end and trimmed below.
        integrate(&sys, tau0, y0, tau_end, &ctrl.step_control(), Some(&g), &mut obs)?
    };
    if let Stop::Event { t, .. } = out.stop {
        while rec.grid.len() > 1 && rec.grid.last().unwrap().ln() >= t {
            rec.grid.pop();
            rec.f.pop();
            rec.fprime.pop();
            rec.flux.pop();
        }
    }
    rec.finish(out.t, &out.y);
    let mut traj = ProfileTrajectory {
        a,
        grid: rec.grid,
        f: rec.f,
        fprime: rec.fprime,
        flux: rec.flux,
        tag: ProfileTag::Indeterminate,
        r_start: r0,
    };
    if let Stop::Event { .. } = out.stop {
        // Pin the zero exactly.
        *traj.f.last_mut().unwrap() = 0.0;
    }
    traj.tag = classify_trajectory(exps, &traj, ctrl.tol_slope);
    Ok((traj, out.t.exp()))
}

/// Integrates the profile from `f(0) = a` out to `r_max`, stopping at the first zero.
///
/// An `Indeterminate` outcome doubles `r_max` up to `ctrl.max_doublings` times.
pub fn integrate_profile(
    exps: &ExponentSet,
    a: f64,
    r_max: f64,
    ctrl: &ProfileControl,
) -> Result<ProfileTrajectory> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("profile height must be positive, got {a}")));
    }
    if !(r_max > 0.0) {
        return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
    }
    let r0 = ctrl.r0_factor * core_width(exps, a);
    if r_max <= r0 {
        return Err(Error::Domain(format!("r_max = {r_max} below the series start {r0:e}")));
    }
    let mut r_end = r_max;
    let mut doublings = 0;
    loop {
        let (traj, _) = run_stored(exps, a, r0, r_end, ctrl)?;
        if traj.tag != ProfileTag::Indeterminate || doublings >= ctrl.max_doublings {
            return Ok(traj);
        }
        r_end *= 2.0;
        doublings += 1;
    }
}

/// Tag rule: a sign change gives `CrossesZero`; positive with terminal
/// log–log slope at most `−(α/β)(1 − tol_slope)` gives `PositiveDecaying`.
pub fn classify_trajectory(exps: &ExponentSet, traj: &ProfileTrajectory, tol_slope: f64) -> ProfileTag {
    let n = traj.f.len();
    if let Some(i) = traj.f.iter().position(|&v| v <= 0.0) {
        let (r_hit, slope_at_hit) = if traj.f[i] == 0.0 || i == 0 {
            (traj.grid[i], traj.fprime[i])
        } else {
            let (r0, r1) = (traj.grid[i - 1], traj.grid[i]);
            let (f0, f1) = (traj.f[i - 1], traj.f[i]);
            let s = f0 / (f0 - f1);
            (
                r0 + s * (r1 - r0),
                traj.fprime[i - 1] + s * (traj.fprime[i] - traj.fprime[i - 1]),
            )
        };
        return ProfileTag::CrossesZero { r_hit, slope_at_hit };
    }
    let (r, f, fp) = (traj.grid[n - 1], traj.f[n - 1], traj.fprime[n - 1]);
    if n < 2 || r <= 0.0 {
        return ProfileTag::Indeterminate;
    }
    let slope = r * fp / f;
    if slope <= -exps.tail_barrier_exp * (1.0 - tol_slope) {
        ProfileTag::PositiveDecaying
    } else {
        ProfileTag::Indeterminate
    }
}

/// Which side of the threshold a committed probe lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Below,
    Above,
}

/// Integrates without storage until the trajectory commits to a side.
///
/// A zero crossing is `Below`. Past `commit_factor·ℓ(a)`, a local slope
/// shallower than the midpoint of `−α/β` and `−p/(2−p)` means the trajectory
/// has joined the slow `r^{−α/β}` branch: `Above`. Exhausting the radius
/// budget also counts as `Above`.
pub fn probe_side(exps: &ExponentSet, a: f64, ctrl: &ProfileControl) -> Result<Side> {
    let width = core_width(exps, a);
    let r0 = ctrl.r0_factor * width;
    let y0 = series_start(exps, a, r0)?;
    let sys = ProfileOde::new(exps, a);
    let g = |_t: f64, y: &[f64; 2]| y[0];
    let r_commit = ctrl.commit_factor * width;
    let mid = -0.5 * (exps.tail_barrier_exp + exps.tail_profile_exp);
    let p = exps.p;
    let mut committed = |s: &DenseStep<2>| {
        let r = s.t1().exp();
        let (f, wt) = (s.y1[0], s.y1[1]);
        !(r >= r_commit && f > 0.0 && r * phi(r * wt, p) / f >= mid)
    };
    let out = integrate(
        &sys,
        r0.ln(),
        y0,
        ctrl.probe_r_max.ln(),
        &ctrl.step_control(),
        Some(&g),
        &mut committed,
    )?;
    Ok(match out.stop {
        Stop::Event { .. } => Side::Below,
        _ => Side::Above,
    })
}

/// Shooting bracket `(a_lo, a_hi)` with `a_hi − a_lo ≤ tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub a_lo: f64,
    pub a_hi: f64,
    pub tol: f64,
    pub iterations: u32,
}

impl Threshold {
    pub fn a_star(&self) -> f64 {
        0.5 * (self.a_lo + self.a_hi)
    }
}

fn expand_bracket(exps: &ExponentSet, bracket: (f64, f64), ctrl: &ProfileControl) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Bracket(format!("need 0 < a_lo < a_hi, got ({lo}, {hi})")));
    }
    let mut budget = ctrl.bracket_expansions;
    loop {
        let s_lo = probe_side(exps, lo, ctrl)?;
        let s_hi = probe_side(exps, hi, ctrl)?;
        match (s_lo, s_hi) {
            (Side::Below, Side::Above) => return Ok((lo, hi)),
            _ if budget == 0 => {
                return Err(Error::Bracket(format!(
                    "a_lo = {lo} is {s_lo:?} and a_hi = {hi} is {s_hi:?} after {} expansions",
                    ctrl.bracket_expansions
                )))
            }
            (Side::Above, Side::Above) => {
                hi = lo;
                lo /= 4.0;
            }
            (Side::Below, Side::Below) => {
                lo = hi;
                hi *= 4.0;
            }
            (Side::Above, Side::Below) => {
                return Err(Error::Bracket(format!(
                    "inverted classification: a_lo = {lo} stays positive while a_hi = {hi} crosses"
                )))
            }
        }
        budget -= 1;
    }
}

/// Bisects the committed-probe classification down to `tol`.
pub fn shoot(exps: &ExponentSet, bracket: (f64, f64), tol: f64, ctrl: &ProfileControl) -> Result<Threshold> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol must be positive, got {tol}")));
    }
    let (mut lo, mut hi) = expand_bracket(exps, bracket, ctrl)?;
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match probe_side(exps, mid, ctrl)? {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
        }
        iterations += 1;
    }
    let th = Threshold {
        a_lo: lo,
        a_hi: hi,
        tol,
        iterations,
    };
    if ctrl.side_probes > 0 {
        check_sides(exps, &th, bracket, ctrl)?;
    }
    Ok(th)
}

/// Probe heights on each side of the threshold, geometric in the offset.
pub fn side_offsets(th: &Threshold, bracket: (f64, f64), count: usize) -> (Vec<f64>, Vec<f64>) {
    let span_lo = (th.a_lo - bracket.0.min(th.a_lo * 0.5)).max(2.0 * th.tol);
    let span_hi = (bracket.1.max(th.a_hi * 1.5) - th.a_hi).max(2.0 * th.tol);
    let offs = |span: f64| -> Vec<f64> {
        let d0 = th.tol;
        (0..count)
            .map(|j| {
                let s = j as f64 / (count.max(2) - 1) as f64;
                d0 * (span / d0).powf(s)
            })
            .collect()
    };
    let below = offs(span_lo).into_iter().map(|d| th.a_lo - d).filter(|&a| a > 0.0).collect();
    let above = offs(span_hi).into_iter().map(|d| th.a_hi + d).collect();
    (below, above)
}

fn check_sides(exps: &ExponentSet, th: &Threshold, bracket: (f64, f64), ctrl: &ProfileControl) -> Result<()> {
    let (below, above) = side_offsets(th, bracket, ctrl.side_probes);
    let jobs: Vec<(f64, Side)> = below
        .iter()
        .map(|&a| (a, Side::Below))
        .chain(above.iter().map(|&a| (a, Side::Above)))
        .collect();
    let bad: Vec<f64> = jobs
        .par_iter()
        .map(|&(a, want)| probe_side(exps, a, ctrl).map(|s| (a, s == want)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(a, _)| a)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Inconclusive(format!(
            "classification is not monotone around a_* = {}: inconsistent probes at {bad:?}",
            th.a_star()
        )))
    }
}

/// Shooting threshold `a_*` to absolute tolerance `tol`.
pub fn find_a_star(exps: &ExponentSet, bracket: (f64, f64), tol: f64, ctrl: &ProfileControl) -> Result<f64> {
    shoot(exps, bracket, tol, ctrl).map(|th| th.a_star())
}

/// The constructed very singular profile `f_U` and its tail constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarSolution {
    pub exps: ExponentSet,
    pub a_u: f64,
    pub threshold: Threshold,
    pub profile: ProfileTrajectory,
    pub omega_star_est: f64,
    pub tail_slope: f64,
    pub tail_fit_r2: f64,
    pub tail_fit_window: (f64, f64),
    pub interpolation: String,
}

/// Least-squares tail fit over `[r_lo, r_hi]`: free log–log slope, plus the
/// amplitude with the slope pinned to `−p/(2−p)`.
pub fn tail_fit(exps: &ExponentSet, traj: &ProfileTrajectory, r_lo: f64, r_hi: f64, min_points: usize) -> Result<(LinearFit, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = traj
        .grid
        .iter()
        .zip(&traj.f)
        .filter(|(&r, &f)| r >= r_lo && r <= r_hi && f > 0.0)
        .map(|(&r, &f)| (r.ln(), f.ln()))
        .unzip();
    if xs.len() < min_points.max(3) {
        return Err(Error::TailFit(format!(
            "{} points in [{r_lo:e}, {r_hi:e}], need {}",
            xs.len(),
            min_points
        )));
    }
    let fit = linear_fit(&xs, &ys);
    let k = exps.tail_profile_exp;
    let log_omega = xs.iter().zip(&ys).map(|(x, y)| y + k * x).sum::<f64>() / xs.len() as f64;
    Ok((fit, log_omega.exp()))
}

/// Shoots for the threshold and assembles `f_U` over the range where the
/// two bracketing trajectories agree.
pub fn build_vss_profile(exps: &ExponentSet, tol: f64, ctrl: &ProfileControl) -> Result<SelfSimilarSolution> {
    let th = shoot(exps, ctrl.bracket, tol, ctrl)?;
    let r0 = ctrl.r0_factor * core_width(exps, th.a_hi);
    let (lo, hi) = rayon::join(
        || run_stored(exps, th.a_lo, r0, ctrl.profile_r_cap, ctrl),
        || run_stored(exps, th.a_hi, r0, ctrl.profile_r_cap, ctrl),
    );
    let (lo, _) = lo?;
    let (mut hi, _) = hi?;
    let m = lo.grid.len().min(hi.grid.len());
    let mut end = 1;
    while end < m
        && hi.f[end] > 0.0
        && (lo.f[end] - hi.f[end]).abs() <= ctrl.agreement * hi.f[end]
    {
        end += 1;
    }
    hi.grid.truncate(end);
    hi.f.truncate(end);
    hi.fprime.truncate(end);
    hi.flux.truncate(end);
    hi.tag = classify_trajectory(exps, &hi, ctrl.tol_slope);
    if hi.tag != ProfileTag::PositiveDecaying {
        return Err(Error::TailFit(format!(
            "threshold trajectory is {:?} at the end of its trusted range r = {:e}",
            hi.tag,
            hi.grid[end - 1]
        )));
    }
    let r_hi = hi.grid[end - 1];
    let r_lo = r_hi / 10.0;
    let (fit, omega) = tail_fit(exps, &hi, r_lo, r_hi, ctrl.min_fit_points)?;
    Ok(SelfSimilarSolution {
        exps: *exps,
        a_u: th.a_hi,
        threshold: th,
        profile: hi,
        omega_star_est: omega,
        tail_slope: fit.slope,
        tail_fit_r2: fit.r2,
        tail_fit_window: (r_lo, r_hi),
        interpolation: "cubic-hermite".into(),
    })
}

/// Cubic Hermite interpolation of a trajectory at `r` inside its grid.
pub fn interpolate(traj: &ProfileTrajectory, r: f64) -> f64 {
    let g = &traj.grid;
    if r <= g[0] {
        return traj.f[0];
    }
    let n = g.len();
    if r >= g[n - 1] {
        return traj.f[n - 1];
    }
    let i = g.partition_point(|&x| x <= r) - 1;
    let h = g[i + 1] - g[i];
    let s = (r - g[i]) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * traj.f[i]
        + (s3 - 2.0 * s2 + s) * h * traj.fprime[i]
        + (-2.0 * s3 + 3.0 * s2) * traj.f[i + 1]
        + (s3 - s2) * h * traj.fprime[i + 1]
}

impl SelfSimilarSolution {
    /// `f_U(ρ)`, with the fitted tail `ω* ρ^{−p/(2−p)}` past the computed range.
    pub fn profile_at(&self, rho: f64) -> f64 {
        let r_end = *self.profile.grid.last().unwrap();
        if rho <= r_end {
            interpolate(&self.profile, rho)
        } else {
            self.omega_star_est * rho.powf(-self.exps.tail_profile_exp)
        }
    }

    /// Last radius of the computed profile.
    pub fn r_end(&self) -> f64 {
        *self.profile.grid.last().unwrap()
    }
}

/// `U(t, r) = t^{−α} f_U(r t^{−β})`.
pub fn eval_u(ss: &SelfSimilarSolution, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("U needs t > 0, got {t}")));
    }
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("U needs r ≥ 0, got {r}")));
    }
    Ok(t.powf(-ss.exps.alpha) * ss.profile_at(r * t.powf(-ss.exps.beta)))
}

/// `G_{a,λ}(t, r) = λ^{p/(2−p)} t^{−α} g(λ r t^{−β})`, zero past the support of `g`.
pub fn eval_subsolution_g(exps: &ExponentSet, g: &ProfileTrajectory, lambda: f64, t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("G needs t > 0, got {t}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("λ must lie in (0, 1), got {lambda}")));
    }
    let r_hit = match g.tag {
        ProfileTag::CrossesZero { r_hit, .. } => r_hit,
        _ => return Err(Error::Domain("G needs a compactly supported profile".into())),
    };
    let rho = lambda * r * t.powf(-exps.beta);
    if rho >= r_hit {
        return Ok(0.0);
    }
    let v = interpolate(g, rho).max(0.0);
    Ok(lambda.powf(exps.tail_profile_exp) * t.powf(-exps.alpha) * v)
}

/// Relative residual of the profile equation at interior samples, by
/// five-point differences of `w` in `ln r`.
///
/// Each entry is `|res| / Σ|terms|`; samples closer than `1e3·r_start` to
/// the origin, the final point and points adjacent to a non-uniform spacing
/// are skipped.
pub fn ode_residual(exps: &ExponentSet, traj: &ProfileTrajectory) -> Vec<(f64, f64)> {
    let g = &traj.grid;
    let n = g.len();
    let mut out = Vec::new();
    if n < 7 {
        return out;
    }
    let lt: Vec<f64> = g.iter().map(|r| if *r > 0.0 { r.ln() } else { f64::NEG_INFINITY }).collect();
    for i in 3..n - 3 {
        if g[i] < 1e3 * traj.r_start {
            continue;
        }
        let d = lt[i + 1] - lt[i];
        let uniform = (-2..2).all(|j: i64| {
            let a = (i as i64 + j) as usize;
            ((lt[a + 1] - lt[a]) - d).abs() <= 1e-6 * d
        });
        if !uniform {
            continue;
        }
        let w = &traj.flux;
        let dw_dtau = (w[i - 2] - 8.0 * w[i - 1] + 8.0 * w[i + 1] - w[i + 2]) / (12.0 * d);
        let r = g[i];
        let terms = [
            dw_dtau / r,
            (exps.nf() - 1.0) * w[i] / r,
            exps.alpha * traj.f[i],
            exps.beta * r * traj.fprime[i],
            -traj.fprime[i].abs().powf(exps.q),
        ];
        let res: f64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        out.push((r, res.abs() / scale.max(f64::MIN_POSITIVE)));
    }
    out
}

/// Tail amplitude `ω*` of the pure diffusion–drift balance `f = ω r^{−p/(2−p)}`.
pub fn omega_star_closed_form(exps: &ExponentSet) -> f64 {
    let k = exps.tail_profile_exp;
    let base = (k - exps.nf()) * k.powf(exps.p - 1.0) / (exps.beta * k - exps.alpha);
    base.powf(1.0 / (2.0 - exps.p))
}
