//! Checks that need no evolution: the monotonicity inequality for the
//! flux and absorption vector fields, and the barrier residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::report::{CheckReport, Measurement, Table};
use crate::error::Result;
use crate::params::{check_range, derive_exponents, ExponentSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorConfig {
    pub sample_count: usize,
    pub rng_seed: u64,
    pub max_dim: usize,
    /// Magnitudes are drawn log-uniformly from `[10^lo, 10^hi]`.
    pub log10_range: (f64, f64),
    /// Fraction of pairs drawn as small perturbations `b ≈ a`.
    pub near_fraction: f64,
    pub granularity: f64,
    pub floor: f64,
}

impl Default for VectorConfig {
    fn default() -> Self {
        Self {
            sample_count: 100_000,
            rng_seed: 7,
            max_dim: 5,
            log10_range: (-6.0, 6.0),
            near_fraction: 0.25,
            granularity: 1e-3,
            floor: 1e-12,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|v|^{e−1} v` with `0 ↦ 0`.
fn power_field(v: &[f64], e: f64, out: &mut [f64]) {
    let n = norm(v);
    let f = if n == 0.0 { 0.0 } else { n.powf(e - 1.0) };
    for (o, x) in out.iter_mut().zip(v) {
        *o = f * x;
    }
}

/// Splits `Λ(a, b) = A − ϑ B` into `(A, B, scale)` with `scale = |a|^{2q} + |b|^{2q}`.
pub fn lambda_parts(p: f64, q: f64, a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let d = a.len();
    let mut fa = vec![0.0; d];
    let mut fb = vec![0.0; d];
    power_field(a, p - 1.0, &mut fa);
    power_field(b, p - 1.0, &mut fb);
    let (na, nb) = (norm(a), norm(b));
    let dot: f64 = (0..d).map(|i| (a[i] - b[i]) * (fa[i] - fb[i])).sum();
    let weight = na.powf(2.0 * q - p) * f64::from(na > 0.0) + nb.powf(2.0 * q - p) * f64::from(nb > 0.0);
    power_field(a, q, &mut fa);
    power_field(b, q, &mut fb);
    let gap: f64 = (0..d).map(|i| (fa[i] - fb[i]).powi(2)).sum();
    (dot * weight, gap, na.powf(2.0 * q) + nb.powf(2.0 * q))
}

pub fn lambda(p: f64, q: f64, theta: f64, a: &[f64], b: &[f64]) -> f64 {
    let (x, y, _) = lambda_parts(p, q, a, b);
    x - theta * y
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize, log10_range: (f64, f64)) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    let mag = 10f64.powf(rng.gen_range(log10_range.0..=log10_range.1));
    for x in v.iter_mut() {
        *x *= mag / n;
    }
    v
}

/// Largest `ϑ` on the `granularity` lattice in `(0, 1]` with `min Λ ≥ −floor·scale`.
pub fn check_vector_inequality(p: f64, q: f64, cfg: &VectorConfig) -> CheckReport {
    let mut report = CheckReport::new("vector_inequality");
    report
        .param("p", p)
        .param("q", q)
        .param("sample_count", cfg.sample_count)
        .param("rng_seed", cfg.rng_seed)
        .param("dimensions", format!("1..={}", cfg.max_dim))
        .param("log10_magnitudes", [cfg.log10_range.0, cfg.log10_range.1])
        .param("granularity", cfg.granularity);
    if !(q >= p / 2.0) {
        report.push(Measurement::holds("q >= p/2", false));
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut samples = Vec::with_capacity(cfg.sample_count + 2);
    // Deterministic edge cases: equal vectors and one vector zero.
    samples.push(lambda_parts(p, q, &[1.0, -2.0], &[1.0, -2.0]));
    samples.push(lambda_parts(p, q, &[0.3, 0.4, 1.2], &[0.0, 0.0, 0.0]));
    for _ in 0..cfg.sample_count {
        let dim = rng.gen_range(1..=cfg.max_dim);
        let a = random_vector(&mut rng, dim, cfg.log10_range);
        let b = if rng.gen_bool(cfg.near_fraction) {
            let rel = 10f64.powf(rng.gen_range(-6.0..=0.0));
            let mut b = random_vector(&mut rng, dim, (0.0, 0.0));
            let na = norm(&a);
            for (x, y) in b.iter_mut().zip(&a) {
                *x = y + *x * rel * na;
            }
            b
        } else {
            random_vector(&mut rng, dim, cfg.log10_range)
        };
        samples.push(lambda_parts(p, q, &a, &b));
    }
    let admissible = |theta: f64| samples.iter().all(|&(x, y, s)| x - theta * y >= -cfg.floor * s);
    let steps = (1.0 / cfg.granularity).round() as i64;
    let (mut lo, mut hi) = (0i64, steps + 1);
    // Invariant: lattice index `lo` admissible (0 trivially), `hi` not or past the end.
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if admissible(mid as f64 * cfg.granularity) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = lo as f64 * cfg.granularity;
    let worst = samples
        .iter()
        .filter(|s| s.2 > 0.0)
        .map(|&(x, y, s)| (x - theta * y) / s)
        .fold(f64::INFINITY, f64::min);
    let ratio = samples
        .iter()
        .filter(|s| s.1 > 0.0)
        .map(|&(x, y, _)| x / y)
        .fold(f64::INFINITY, f64::min);
    report.push(Measurement::at_least("theta", theta, cfg.granularity).with_note("largest admissible lattice value"));
    report.push(Measurement::info("min_normalized_lambda_at_theta", worst));
    report.push(Measurement::info("min_ratio_A_over_B", ratio));
    let (x0, y0, s0) = samples[0];
    report.push(Measurement::holds("equal_vectors_give_zero", x0 == 0.0 && y0 == 0.0 && s0 > 0.0));
    let (x1, y1, s1) = samples[1];
    let expect = (1.0 - theta) * s1;
    report.push(Measurement::holds(
        "zero_vector_gives_(1-theta)|a|^2q",
        ((x1 - theta * y1) - expect).abs() <= 1e-12 * s1,
    ));
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    /// `(p, q, N)` sets to evaluate.
    pub sets: Vec<(f64, f64, u32)>,
    pub offsets: Vec<f64>,
    pub samples: usize,
    pub log10_rho: (f64, f64),
    pub floor: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            sets: vec![(1.6, 0.85, 2), (1.5, 0.8, 1), (1.9, 0.97, 3)],
            offsets: vec![0.0, 0.5],
            samples: 1000,
            log10_rho: (-3.0, 3.0),
            floor: 1e-10,
        }
    }
}

/// Terms of `−Δ_p Γ + |Γ'|^q` for `Γ(r − r0) = γ ρ^{−m}` at `ρ = r − r0`:
/// `(radial, curvature, absorption)` with `−Δ_p Γ = radial + curvature`.
pub fn barrier_terms(exps: &ExponentSet, r0: f64, rho: f64) -> (f64, f64, f64) {
    let (p, q, g, m) = (exps.p, exps.q, exps.gamma, exps.tail_barrier_exp);
    let r = r0 + rho;
    let slope = g * m * rho.powf(-m - 1.0);
    // w = |Γ'|^{p−2}Γ' = −slope^{p−1}
    let w = -slope.powf(p - 1.0);
    let dw = slope.powf(p - 1.0) * (p - 1.0) * (m + 1.0) / rho;
    let radial = -dw;
    let curvature = -(exps.nf() - 1.0) / r * w;
    (radial, curvature, slope.powf(q))
}

pub fn check_barrier_supersolution(cfg: &BarrierConfig) -> Result<CheckReport> {
    let mut report = CheckReport::new("barrier_supersolution");
    report
        .param("sets", &cfg.sets)
        .param("offsets", &cfg.offsets)
        .param("samples", cfg.samples)
        .param("log10_rho", [cfg.log10_rho.0, cfg.log10_rho.1])
        .param("floor", cfg.floor);
    let mut table = Table::new("residual", &["p", "q", "N", "offset", "r", "residual", "scale"]);
    for &(p, q, n) in &cfg.sets {
        let exps = derive_exponents(p, q, n)?;
        for &r0 in &cfg.offsets {
            let mut worst = f64::INFINITY;
            for j in 0..cfg.samples {
                let x = cfg.log10_rho.0
                    + (cfg.log10_rho.1 - cfg.log10_rho.0) * j as f64 / (cfg.samples - 1).max(1) as f64;
                let rho = 10f64.powf(x);
                let (a, b, c) = barrier_terms(&exps, r0, rho);
                let res = a + b + c;
                let scale = a.abs() + b.abs() + c.abs();
                worst = worst.min(res / scale);
                if j % 50 == 0 {
                    table.push(vec![p, q, n as f64, r0, r0 + rho, res, scale]);
                }
            }
            report.push(Measurement::at_least(
                format!("min_relative_residual(p={p},q={q},N={n},offset={r0})"),
                worst,
                -cfg.floor,
            ));
        }
    }
    report.table(table);
    Ok(report)
}

/// Verifies `(p, q, N)` is admissible before sampling.
pub fn admissible(p: f64, q: f64, n: u32) -> bool {
    check_range(p, q, n).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::report::Verdict;

    #[test]
    fn lambda_vanishes_on_the_diagonal() {
        assert_eq!(lambda(1.6, 0.85, 0.7, &[1.0, 2.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn lambda_with_zero_partner() {
        let a = [3.0, 4.0];
        let th = 0.4;
        let got = lambda(1.6, 0.85, th, &a, &[0.0, 0.0]);
        let want = (1.0 - th) * 5f64.powf(1.7);
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn reference_inequality_passes() {
        let cfg = VectorConfig {
            sample_count: 5000,
            ..VectorConfig::default()
        };
        let r = check_vector_inequality(1.6, 0.85, &cfg);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.text());
        let th = r.measurement("theta").unwrap().value;
        assert!(th > 0.0 && th <= 1.0);
    }

    #[test]
    fn q_equal_one_regime_finds_theta() {
        for p in [1.1, 1.5, 1.9] {
            let cfg = VectorConfig {
                sample_count: 2000,
                ..VectorConfig::default()
            };
            let r = check_vector_inequality(p, 1.0, &cfg);
            assert_eq!(r.verdict, Verdict::Pass, "p = {p}: {}", r.text());
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = VectorConfig {
            sample_count: 1000,
            ..VectorConfig::default()
        };
        let a = check_vector_inequality(1.5, 0.8, &cfg);
        let b = check_vector_inequality(1.5, 0.8, &cfg);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn barrier_terms_against_finite_differences() {
        let e = derive_exponents(1.6, 0.85, 2).unwrap();
        let r0 = 0.5;
        let gam = |r: f64| e.gamma * (r - r0).powf(-e.tail_barrier_exp);
        let h = 1e-5;
        let w = |r: f64| {
            let d = (gam(r + h) - gam(r - h)) / (2.0 * h);
            r.powf(e.nf() - 1.0) * d.abs().powf(e.p - 2.0) * d
        };
        for rho in [0.3, 1.0, 4.0] {
            let r = r0 + rho;
            let lap = (w(r + h) - w(r - h)) / (2.0 * h) / r.powf(e.nf() - 1.0);
            let d = (gam(r + h) - gam(r - h)) / (2.0 * h);
            let fd = -lap + d.abs().powf(e.q);
            let (a, b, c) = barrier_terms(&e, r0, rho);
            let an = a + b + c;
            assert!((fd - an).abs() < 1e-5 * (a.abs() + b.abs() + c.abs()), "rho {rho}: {fd} vs {an}");
        }
    }

    #[test]
    fn one_dimensional_barrier_is_exact() {
        let e = derive_exponents(1.5, 0.8, 1).unwrap();
        let (a, b, c) = barrier_terms(&e, 0.0, 2.0);
        assert_eq!(b, 0.0);
        assert!((a + c).abs() < 1e-12 * c);
    }

    #[test]
    fn barrier_check_passes() {
        let r = check_barrier_supersolution(&BarrierConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.text());
    }
}
