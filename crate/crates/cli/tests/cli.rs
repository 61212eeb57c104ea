use std::path::Path;
use std::process::{Command, Output};

fn spincorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spincorr")).args(args).output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", dir.to_str().unwrap()]);
    spincorr(&full)
}

#[test]
fn evolve_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["evolve", "--set", "n_spins=4", "--set", "t_final=1", "--engine", "full", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = std::path::PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("evolve_"));
    let csv = std::fs::read_to_string(dir.join("data.csv")).unwrap();
    assert!(csv.starts_with("scenario,N,xi,t,site,sz,abs_sx,purity,quality,fidelity,extra\n"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 7);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("evolve.cfg");
    std::fs::write(&cfg, "# small chain\nn_spins = 5   # sites\nxi = 2.5\nt_final = 2\n").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let out = run_in(d, &["evolve", "--config", cfg.to_str().unwrap(), "--no-timestamp", "--workers", "2"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["data.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join("evolve").join(f)).unwrap(), std::fs::read(b.join("evolve").join(f)).unwrap());
    }
}

#[test]
fn config_error_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "n_spins = -3\n").unwrap();
    let out = run_in(tmp.path(), &["evolve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_spins"));
    let out = run_in(tmp.path(), &["evolve", "--config", tmp.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validation_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["validate", "--set", "fault=negate-reduced-hamiltonian"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_in(tmp.path(), &["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_engine_is_rejected() {
    let out = spincorr(&["evolve", "--engine", "quantum"]);
    assert!(!out.status.success());
}
