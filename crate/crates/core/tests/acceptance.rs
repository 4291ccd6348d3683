//! Acceptance criteria. Prints one line per criterion, then fails if any did.
//!
//! Expected values are recomputed here from `(p, q, N)`; tolerances are pinned.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsslab::experiments::analytic::{check_barrier_supersolution, check_vector_inequality, BarrierConfig, VectorConfig};
use vsslab::experiments::{run_check, CheckReport, Context, ExperimentConfig, Verdict};
use vsslab::params::derive_exponents;
use vsslab::profile::{build_vss_profile, probe_side, shoot, side_offsets, ProfileControl, Side};
use vsslab::solver::SolverConfig;

const P: f64 = 1.6;
const Q: f64 = 0.85;
const N: u32 = 2;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

/// Reference exponents straight from the defining formulas.
fn reference() -> (f64, f64, f64) {
    let alpha = (P - Q) / (2.0 * Q - P);
    let beta = (Q - P + 1.0) / (2.0 * Q - P);
    let eta = 1.0 / (N as f64 * (P - 2.0) + P);
    (alpha, beta, eta)
}

fn context() -> Context {
    Context::new(derive_exponents(P, Q, N).unwrap(), SolverConfig::default(), ExperimentConfig::default())
}

fn value(r: &CheckReport, name: &str) -> f64 {
    r.measurement(name).map_or(f64::NAN, |m| m.value)
}

fn within(x: f64, want: f64, rel: f64) -> bool {
    (x - want).abs() <= rel * want.abs()
}

fn verdict_note(r: &CheckReport) -> String {
    match (&r.verdict, &r.inconclusive_reason) {
        (Verdict::Inconclusive, Some(why)) => format!(" [inconclusive: {why}]"),
        (Verdict::Fail, _) => {
            let names: Vec<&str> = r.failed().iter().map(|m| m.name.as_str()).collect();
            format!(" [failed: {}]", names.join(", "))
        }
        _ => String::new(),
    }
}

fn exponent_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst, mut worst_plain, mut strict, mut count) = (0.0f64, 0.0f64, true, 0);
    while count < 10_000 {
        let n: u32 = rng.gen_range(1..=5);
        let nf = n as f64;
        let p: f64 = rng.gen_range(2.0 * nf / (nf + 1.0)..2.0);
        let q: f64 = rng.gen_range(p / 2.0..p - nf / (nf + 1.0));
        let Ok(e) = derive_exponents(p, q, n) else { continue };
        count += 1;
        let q_star = p - nf / (nf + 1.0);
        let rhs = (nf + 1.0) * (q_star - q) / (2.0 * q - p);
        // Both sides cancel as q -> q_*, so the error is measured against the operand scale.
        let err = ((e.alpha - nf * e.beta) - rhs).abs();
        worst = worst.max(err / (e.alpha.abs() + nf * e.beta.abs()));
        worst_plain = worst_plain.max(err / rhs.abs());
        let ratio = e.alpha / e.beta;
        strict &= nf < ratio && ratio < p / (2.0 - p);
    }
    outcome(
        worst <= 1e-12 && strict,
        format!("{count} sets, max scaled err {worst:.2e} (plain relative {worst_plain:.2e}), strict ordering {strict}"),
    )
}

fn vector_inequality() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, q) in [(1.6, 0.85), (1.5, 0.8), (1.9, 0.97)] {
        let cfg = VectorConfig {
            sample_count: 100_000,
            log10_range: (-6.0, 6.0),
            ..VectorConfig::default()
        };
        let r = check_vector_inequality(p, q, &cfg);
        let theta = value(&r, "theta");
        let lam = value(&r, "min_normalized_lambda_at_theta");
        let good = r.verdict == Verdict::Pass && theta > 0.0 && theta <= 1.0 && lam >= -1e-12;
        ok &= good;
        parts.push(format!("({p},{q}) theta={theta} min={lam:.2e}"));
    }
    outcome(ok, parts.join("; "))
}

fn barrier_supersolution() -> Outcome {
    let cfg = BarrierConfig::default();
    let r = check_barrier_supersolution(&cfg).unwrap();
    let worst = r
        .measurements
        .iter()
        .filter(|m| m.name.starts_with("min_relative_residual"))
        .map(|m| m.value)
        .fold(f64::INFINITY, f64::min);
    let cases = r.measurements.len();
    let ok = r.verdict == Verdict::Pass
        && cfg.samples >= 1000
        && cfg.sets.len() >= 3
        && cfg.offsets.iter().any(|&o| o == 0.0)
        && cfg.offsets.iter().any(|&o| o > 0.0)
        && worst >= -1e-10;
    outcome(ok, format!("{cases} cases x {} radii, min relative residual {worst:.2e}", cfg.samples))
}

fn shooting() -> Outcome {
    let e = derive_exponents(P, Q, N).unwrap();
    let ctrl = ProfileControl {
        side_probes: 0,
        ..ProfileControl::default()
    };
    let th = match shoot(&e, ctrl.bracket, 1e-8, &ctrl) {
        Ok(t) => t,
        Err(err) => return outcome(false, err.to_string()),
    };
    let (below, above) = side_offsets(&th, ctrl.bracket, 20);
    let consistent = below.len() == 20
        && above.len() == 20
        && below.iter().all(|&a| probe_side(&e, a, &ctrl).map_or(false, |s| s == Side::Below))
        && above.iter().all(|&a| probe_side(&e, a, &ctrl).map_or(false, |s| s == Side::Above));
    let ss = match build_vss_profile(&e, 1e-8, &ctrl) {
        Ok(s) => s,
        Err(err) => return outcome(false, err.to_string()),
    };
    let want = -P / (2.0 - P);
    let ok = th.a_hi - th.a_lo <= 1e-8 && consistent && within(ss.tail_slope, want, 0.05);
    outcome(
        ok,
        format!(
            "a_* = {:.9}, 20+20 probes consistent {consistent}, tail slope {:.4} vs {want}",
            th.a_star(),
            ss.tail_slope
        ),
    )
}

fn stationarity(ctx: &Context) -> Outcome {
    let r = match run_check(ctx, "stationarity") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let tol = value(&r, "scheme_tolerance");
    let worst = value(&r, "max_distance_to_profile");
    let s_end = ctx.config.stationarity.s_end;
    let ok = r.verdict == Verdict::Pass && s_end >= 1.0 && worst <= 10.0 * tol;
    outcome(ok, format!("max |v - f_U| {worst:.3e} vs 10 x {tol:.3e} over s in [0, {s_end}]{}", verdict_note(&r)))
}

fn decay_rates(ctx: &Context) -> Outcome {
    let r = match run_check(ctx, "decay_rates") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (alpha, beta, eta) = reference();
    let nf = N as f64;
    let cases = [
        ("sup_norm_slope", -alpha),
        ("mass_slope", -(alpha - nf * beta)),
        ("grad_sup_norm_slope", -(alpha + beta)),
        ("fat_tail_sup_norm_slope", -nf * eta),
    ];
    let mut ok = r.verdict == Verdict::Pass;
    let mut parts = Vec::new();
    for (name, want) in cases {
        let got = value(&r, name);
        ok &= within(got, want, 0.10);
        parts.push(format!("{name} {got:.4} vs {want}"));
    }
    outcome(ok, format!("{}{}", parts.join(", "), verdict_note(&r)))
}

fn small_time(ctx: &Context) -> Outcome {
    let r = match run_check(ctx, "small_time_diffusion_dominance") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (_, _, eta) = reference();
    let nf = N as f64;
    let want = (nf + 1.0) * (P - nf / (nf + 1.0) - Q) * eta;
    let got = value(&r, "l1_gap_slope");
    let ok = r.verdict == Verdict::Pass && within(got, want, 0.15) && (want - 0.3125).abs() < 1e-12;
    outcome(ok, format!("slope {got:.4} vs {want}{}", verdict_note(&r)))
}

fn fundamental(ctx: &Context) -> Outcome {
    let masses = &ctx.config.fundamental.masses;
    let r = match run_check(ctx, "fundamental_scaling") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let tol = ctx.config.fundamental.tol;
    let mono = value(&r, "mass_monotonicity_excess");
    let scaling = value(&r, "scaling_relative_gap");
    let sens = value(&r, "scaling_relative_gap_width_sensitivity");
    let gaps = r
        .tables
        .iter()
        .find(|t| t.name == "gap_to_vss")
        .and_then(|t| t.column("relative_gap"))
        .unwrap_or_default();
    let decreasing = gaps.len() == 4 && gaps.windows(2).all(|w| w[1] < w[0]);
    let ok = r.verdict == Verdict::Pass
        && masses == &vec![1.0, 4.0, 16.0, 64.0]
        && mono <= tol
        && scaling <= tol
        && sens <= tol
        && decreasing;
    outcome(
        ok,
        format!(
            "monotonicity excess {mono:.2e}, scaling gap {scaling:.2e} (width shift {sens:.2e}), tol {tol}, gaps {gaps:.4?}{}",
            verdict_note(&r)
        ),
    )
}

fn convergence(ctx: &Context) -> Outcome {
    let r = match run_check(ctx, "convergence") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let c = &ctx.config.convergence;
    let data = c.data.len();
    let mut ok = r.verdict == Verdict::Pass && data >= 2 && c.s_start <= 1.0 && c.s_end >= 6.0;
    let mut parts = Vec::new();
    for k in 0..data {
        let red = value(&r, &format!("datum{k}_reduction"));
        let rise = value(&r, &format!("datum{k}_max_rise_late"));
        ok &= red <= 0.1 && rise.is_finite();
        parts.push(format!("datum{k} E(6)/E(1) {red:.2e}, late rise {rise:.2e}"));
    }
    outcome(ok, format!("{} (factor-10 bar is repo policy){}", parts.join("; "), verdict_note(&r)))
}

fn refinement(ctx: &Context) -> Outcome {
    let r = match run_check(ctx, "refinement") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let shifts: Vec<String> = r
        .measurements
        .iter()
        .filter(|m| m.name.ends_with("_shift"))
        .map(|m| format!("{} {:.2e}", m.name.trim_end_matches("_shift"), m.value))
        .collect();
    let ok = r.verdict == Verdict::Pass && shifts.len() >= 5;
    outcome(ok, format!("{}{}", shifts.join(", "), verdict_note(&r)))
}

#[test]
fn acceptance_criteria() {
    let ctx = context();
    let criteria: Vec<(&str, Duration, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 exponent identities", Duration::from_secs(1), Box::new(exponent_identities)),
        ("2 vector inequality", Duration::from_secs(10), Box::new(vector_inequality)),
        ("3 barrier supersolution", Duration::from_secs(1), Box::new(barrier_supersolution)),
        ("4 shooting dichotomy", Duration::from_secs(60), Box::new(shooting)),
        ("5 profile stationarity", Duration::from_secs(60), Box::new(|| stationarity(&ctx))),
        ("6 decay rates", Duration::from_secs(240), Box::new(|| decay_rates(&ctx))),
        ("7 small-time diffusion dominance", Duration::from_secs(120), Box::new(|| small_time(&ctx))),
        ("8 fundamental-solution laws", Duration::from_secs(300), Box::new(|| fundamental(&ctx))),
        ("9 headline convergence", Duration::from_secs(300), Box::new(|| convergence(&ctx))),
        ("10 scheme refinement", Duration::from_secs(600), Box::new(|| refinement(&ctx))),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (name, budget, run) in &criteria {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let ok = o.ok && took <= *budget;
        let line = format!(
            "acceptance {name}: {} ({:.1} s, budget {} s) {}\n",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            o.detail
        );
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        if !ok {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
