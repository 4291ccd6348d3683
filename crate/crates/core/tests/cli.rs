use std::process::{Command, Output};

fn vsslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsslab"))
        .args(args)
        .env_remove("VSSLAB_OUT")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn exponents_of_the_reference_set() {
    let o = vsslab(&["exponents", "--p", "1.6", "--q", "0.85", "--N", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = String::from_utf8_lossy(&o.stdout).into_owned();
    let field = |name: &str| -> f64 {
        let line = out.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        line.split_whitespace().nth(1).unwrap().parse().unwrap()
    };
    assert!((field("alpha") - 7.5).abs() < 1e-12);
    assert!((field("gamma") - 11.0592).abs() < 1e-10);
}

#[test]
fn range_errors_exit_with_config_code() {
    let o = vsslab(&["exponents", "--p", "1.2", "--q", "0.7", "--N", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).contains("p_c = 4/3"), "{}", text(&o));
    let o = vsslab(&["exponents", "--p", "1.6", "--q", "0.8", "--N", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_checks_list_the_available_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = vsslab(&["verify", "--check", "bogus", "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).contains("small_time_diffusion_dominance"), "{}", text(&o));
}

#[test]
fn bad_overrides_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = vsslab(&["verify", "--check", "vector_inequality", "--out", out, "--set", "solver.cfl_safety=fast"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o).contains("solver.cfl_safety"), "{}", text(&o));
}

#[test]
fn verify_writes_reports_and_exits_with_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = vsslab(&[
        "verify",
        "--check",
        "vector_inequality",
        "--check",
        "barrier_supersolution",
        "--out",
        out,
        "--set",
        "experiments.vector.sample_count=2000",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    for f in ["vector_inequality.json", "barrier_supersolution.json", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("vector_inequality.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vsslab"))
        .args(["verify", "--check", "barrier_supersolution"])
        .env("VSSLAB_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(dir.path().join("barrier_supersolution.json").exists());
}

#[test]
fn evolve_writes_snapshots_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = vsslab(&[
        "evolve",
        "--out",
        out,
        "--set",
        "evolve.frame=\"physical\"",
        "--set",
        "evolve.t_end=0.01",
        "--set",
        "evolve.observations=[0.0, 0.005, 0.01]",
        "--set",
        "grid.r_max=50.0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let log = std::fs::read_to_string(dir.path().join("run_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4, "{log}");
    assert!(dir.path().join("snapshot_000.csv").exists());
}
