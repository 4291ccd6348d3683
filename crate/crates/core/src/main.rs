use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vsslab::config::{RunConfig, OUT_ENV};
use vsslab::error::{Error, Result};
use vsslab::experiments::{merge, overall, run_check, CheckReport, Context, Verdict};
use vsslab::io::{write_atomic, write_csv_atomic};
use vsslab::profile::{build_vss_profile, omega_star_closed_form, shoot, ProfileControl};
use vsslab::solver::{Observers, Solver};

/// Very singular self-similar solutions: exponents, profiles, evolution and checks.
#[derive(Parser)]
#[command(name = "vsslab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set solver.cfl_safety=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Triple {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "N")]
    n: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived exponents of (p, q, N).
    Exponents {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long = "N")]
        n: u32,
    },
    /// Build the self-similar profile and write it with its metadata.
    Profile {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        triple: Triple,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Locate the shooting threshold only.
    Shoot {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        triple: Triple,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Evolve the configured initial condition and write snapshots and the run log.
    Evolve {
        #[command(flatten)]
        common: Common,
    },
    /// Map a physical snapshot `(r, u)` at time `t` to self-similar variables.
    Rescale {
        #[command(flatten)]
        common: Common,
        /// CSV with columns `r,u`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        t: f64,
    },
    /// Run named checks and write their reports.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "check")]
        checks: Vec<String>,
    },
    /// Run the convergence study.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, triple: Option<&Triple>) -> Result<RunConfig> {
    let mut sets = common.set.clone();
    if let Some(t) = triple {
        sets.extend(t.p.map(|v| format!("exponents.p={v}")));
        sets.extend(t.q.map(|v| format!("exponents.q={v}")));
        sets.extend(t.n.map(|v| format!("exponents.N={v}")));
    }
    if let Some(out) = &common.out {
        sets.push(format!("output={}", toml::Value::String(out.display().to_string())));
    }
    match &common.config {
        Some(path) => RunConfig::from_file(path, &sets),
        None => RunConfig::load(None, &sets),
    }
}

fn cmd_exponents(p: f64, q: f64, n: u32) -> Result<i32> {
    let e = vsslab::derive_exponents(p, q, n)?;
    println!("p                 {}", e.p);
    println!("q                 {}", e.q);
    println!("N                 {}", e.n);
    println!("p_c               {}", e.p_c);
    println!("q_*               {}", e.q_star);
    println!("alpha             {}", e.alpha);
    println!("beta              {}", e.beta);
    println!("eta               {}", e.eta);
    println!("gamma             {}", e.gamma);
    println!("alpha/beta        {}", e.tail_barrier_exp);
    println!("p/(2-p)           {}", e.tail_profile_exp);
    println!("alpha - N beta    {}", e.mass_exponent());
    println!("small-time rate   {}", e.small_time_exponent());
    Ok(0)
}

fn cmd_profile(cfg: &RunConfig, tol: f64) -> Result<i32> {
    let exps = cfg.exps()?;
    let ss = build_vss_profile(&exps, tol, &ProfileControl::default())?;
    let dir = cfg.output_dir();
    let rows: Vec<Vec<f64>> = (0..ss.profile.grid.len())
        .map(|i| vec![ss.profile.grid[i], ss.profile.f[i], ss.profile.fprime[i], ss.profile.flux[i]])
        .collect();
    write_csv_atomic(&dir.join("profile.csv"), &["r", "f", "fprime", "flux"], &rows)?;
    let meta = json!({
        "exponents": exps,
        "a_U": ss.a_u,
        "threshold": ss.threshold,
        "omega_star_est": ss.omega_star_est,
        "omega_star_closed_form": omega_star_closed_form(&exps),
        "tail_slope": ss.tail_slope,
        "tail_fit_r2": ss.tail_fit_r2,
        "tail_fit_window": [ss.tail_fit_window.0, ss.tail_fit_window.1],
        "interpolation": ss.interpolation,
        "tol": tol,
        "artifacts": ["profile.csv"],
    });
    write_atomic(&dir.join("profile.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    println!("a_U = {:.10}", ss.a_u);
    println!("omega_star_est = {:.6}", ss.omega_star_est);
    println!("tail_slope = {:.6}", ss.tail_slope);
    println!("wrote {}", dir.display());
    Ok(0)
}

fn cmd_shoot(cfg: &RunConfig, tol: f64) -> Result<i32> {
    let exps = cfg.exps()?;
    let ctrl = ProfileControl::default();
    let th = shoot(&exps, ctrl.bracket, tol, &ctrl)?;
    println!("{}", serde_json::to_string_pretty(&json!({ "a_star": th.a_star(), "threshold": th }))?);
    Ok(0)
}

fn cmd_evolve(cfg: &RunConfig) -> Result<i32> {
    let exps = cfg.exps()?;
    let frame = cfg.evolve.frame(&exps);
    let grid = cfg.grid.build(exps.n, 0)?;
    let solver = Solver::new(exps, grid, cfg.solver, frame)?;
    let state = solver.init_state(&cfg.initial)?;
    let times: Vec<f64> = cfg.evolve.observations.iter().map(|&t| frame.frame_time(t)).collect();
    let observers = Observers {
        times: times.clone(),
        tail_radii: cfg.evolve.tail_radii.clone(),
    };
    let dir = cfg.output_dir();
    let mut snaps = Vec::new();
    let mut log = Vec::new();
    if times.contains(&0.0) {
        snaps.push(state.clone());
        log.push(solver.record(&state, &observers.tail_radii));
    }
    let s_end = frame.frame_time(cfg.evolve.t_end);
    let (_, rest) = solver.evolve_until(state, s_end, &observers, &mut |st, _| snaps.push(st.clone()))?;
    log.extend(rest);
    let mut artifacts = Vec::new();
    for (k, st) in snaps.iter().enumerate() {
        let rows: Vec<Vec<f64>> = solver
            .physical_radii(st)
            .into_iter()
            .zip(&st.u)
            .map(|(r, &v)| vec![r, frame.value(st.s, v)])
            .collect();
        let name = format!("snapshot_{k:03}.csv");
        write_csv_atomic(&dir.join(&name), &["r", "u"], &rows)?;
        artifacts.push(json!({ "file": name, "t": st.t }));
    }
    let mut cols = vec!["t".to_string(), "mass".into(), "sup_norm".into(), "grad_sup_norm".into()];
    cols.extend(cfg.evolve.tail_radii.iter().map(|r| format!("tail_mass@{r}")));
    let rows: Vec<Vec<f64>> = log
        .iter()
        .map(|r| {
            let mut row = vec![r.t, r.mass, r.sup_norm, r.grad_sup_norm];
            row.extend(r.tail_masses.iter().map(|m| m.unwrap_or(f64::NAN)));
            row
        })
        .collect();
    write_csv_atomic(&dir.join("run_log.csv"), &cols, &rows)?;
    let contaminated = log.iter().any(|r| r.contaminated);
    let meta = json!({
        "exponents": exps,
        "grid": cfg.grid,
        "nodes": solver.grid.len(),
        "solver": cfg.solver,
        "frame": frame,
        "initial_condition": cfg.initial,
        "t_end": cfg.evolve.t_end,
        "boundary_contaminated": contaminated,
        "log": "run_log.csv",
        "snapshots": artifacts,
    });
    write_atomic(&dir.join("run.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    println!("{} observations written to {}", log.len(), dir.display());
    Ok(if contaminated { Verdict::Inconclusive.exit_code() } else { 0 })
}

fn cmd_rescale(cfg: &RunConfig, input: &Path, t: f64) -> Result<i32> {
    let exps = cfg.exps()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let mut rdr = csv::Reader::from_path(input)?;
    let mut rows = Vec::new();
    let (a, b) = ((1.0 + t).powf(exps.alpha), (1.0 + t).powf(-exps.beta));
    for rec in rdr.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| Error::Domain(format!("bad number in column {i} of {}", input.display())))
        };
        rows.push(vec![t.ln_1p(), parse(0)? * b, parse(1)? * a]);
    }
    let dir = cfg.output_dir();
    write_csv_atomic(&dir.join("rescaled.csv"), &["s", "y", "v"], &rows)?;
    println!("{} rows written to {}", rows.len(), dir.join("rescaled.csv").display());
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, extra: &[String]) -> Result<i32> {
    let mut names: Vec<String> = cfg.checks.clone();
    for n in extra {
        if !vsslab::experiments::CHECKS.contains(&n.as_str()) {
            return Err(vsslab::experiments::unknown_check(n));
        }
        if !names.contains(n) {
            names.push(n.clone());
        }
    }
    if names.is_empty() {
        return Err(Error::Config {
            path: "checks".into(),
            msg: format!("no checks selected; available: {}", vsslab::experiments::CHECKS.join(", ")),
        });
    }
    let ctx = Context::new(cfg.exps()?, cfg.solver, cfg.experiments());
    let dir = cfg.output_dir();
    let mut reports: Vec<CheckReport> = Vec::new();
    for name in &names {
        let mut r = match run_check(&ctx, name) {
            Ok(r) => r,
            Err(Error::Inconclusive(msg)) => {
                let mut r = CheckReport::new(name.as_str());
                r.inconclusive(msg);
                r
            }
            Err(e) => return Err(e),
        };
        r.write(&dir)?;
        print!("{}", r.text());
        reports.push(r);
    }
    let verdict = overall(&merge(reports.iter().cloned()));
    let summary = json!({
        "verdict": verdict,
        "checks": reports.iter().map(|r| json!({ "name": r.name, "verdict": r.verdict, "report": format!("{}.json", r.name) })).collect::<Vec<_>>(),
    });
    write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    println!("overall: {verdict}");
    Ok(verdict.exit_code())
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Range(_) => 3,
        Error::Inconclusive(_) => Verdict::Inconclusive.exit_code(),
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Exponents { p, q, n } => cmd_exponents(*p, *q, *n),
        Command::Profile { common, triple, tol } => load(common, Some(triple)).and_then(|c| cmd_profile(&c, *tol)),
        Command::Shoot { common, triple, tol } => load(common, Some(triple)).and_then(|c| cmd_shoot(&c, *tol)),
        Command::Evolve { common } => load(common, None).and_then(|c| cmd_evolve(&c)),
        Command::Rescale { common, input, t } => load(common, None).and_then(|c| cmd_rescale(&c, input, *t)),
        Command::Verify { common, checks } => load(common, None).and_then(|c| cmd_verify(&c, checks)),
        Command::Convergence { common } => {
            load(common, None).and_then(|c| cmd_verify(&RunConfig { checks: vec![], ..c }, &["convergence".into()]))
        }
    };
    match res {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e) as u8)
        }
    }
}
