use std::path::Path;
use std::process::{Command, Output};

use hartree3d::io::{parse_csv, read_snapshot_file};
use serde_json::Value;

const PLANE_WAVE: &str = r#"
M = 8
p = 2
T = 0.05
dt = 0.01
mollifier = "box-averaged"
n = 1

[initial]
kind = "plane-wave"
amplitude = 1.5
k = [1, 0, 0]

[output]
snapshots = "run.hrt3"
"#;

const RANDOM: &str = r#"
M = 8
p = 1
T = 0.02
dt = 0.01
family = "local"
seed = 7

[initial]
kind = "random"
kmax = 2
decay = 1.0
"#;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hartree3d"));
    cmd.env_remove("HARTREE3D_THREADS");
    cmd
}

fn run_config(dir: &Path, text: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, text).unwrap();
    bin()
        .arg(extra.first().copied().unwrap_or("simulate"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir)
        .args(extra.iter().skip(1))
        .output()
        .unwrap()
}

fn report_without_metadata(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("metadata");
    v
}

#[test]
fn simulate_writes_trajectory_snapshots_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), PLANE_WAVE, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let records = parse_csv(&std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.windows(2).all(|w| w[1].t > w[0].t));
    let m0 = records[0].mass;
    assert!(records.iter().all(|r| (r.mass - m0).abs() <= 1e-11 * m0));

    let (grid, snaps) = read_snapshot_file(&dir.path().join("run.hrt3")).unwrap();
    assert_eq!(grid.modes(), 8);
    assert_eq!(snaps.len(), records.len());
    assert_eq!(snaps.last().unwrap().0, records.last().unwrap().t);

    let report = report_without_metadata(&dir.path().join("report.json"));
    assert_eq!(report["study"], "simulate");
    assert_eq!(report["results"]["status"], "ok");
}

#[test]
fn reports_are_reproducible_and_seed_sensitive() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert!(run_config(a.path(), RANDOM, &[]).status.success());
    let cfg = b.path().join("run.toml");
    std::fs::write(&cfg, RANDOM).unwrap();
    let out = bin()
        .args(["simulate", "--threads", "2", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(b.path())
        .env("HARTREE3D_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(run_config(c.path(), RANDOM, &["simulate", "--seed", "8"]).status.success());

    let ra = report_without_metadata(&a.path().join("report.json"));
    let rb = report_without_metadata(&b.path().join("report.json"));
    let rc = report_without_metadata(&c.path().join("report.json"));
    assert_eq!(ra, rb);
    assert_eq!(rc["seed"], 8);
    assert_ne!(ra["results"], rc["results"]);
    let csv = |d: &Path| std::fs::read_to_string(d.join("trajectory.csv")).unwrap();
    assert_eq!(csv(a.path()), csv(b.path()));
}

#[test]
fn potential_info_reports_measured_and_stated_constants() {
    let out = bin()
        .args(["potential-info", "--family", "v2", "--p", "2", "--mollifier", "power", "--n", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let measured = v["l1_norm"]["value"].as_f64().unwrap();
    let oracle = v["lattice_oracle_l1"].as_f64().unwrap();
    assert!((measured - oracle).abs() <= 1e-12 * oracle);
    assert_eq!(v["literature_l1"].as_f64().unwrap(), 1.0 / 512.0);
    assert_eq!(v["continuum_l1"].as_f64().unwrap(), 27.0 / 64.0);
    assert!((v["normalization"].as_f64().unwrap() * measured - 1.0).abs() < 1e-14);
}

#[test]
fn validation_errors_exit_with_code_one() {
    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), &PLANE_WAVE.replace("M = 8", "M = 31"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains('M'));

    let out = run_config(dir.path(), &format!("{PLANE_WAVE}\n[picard]\nnquad = 3\n"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("picard"));

    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn check_invariants_passes_on_a_smooth_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = PLANE_WAVE.replace(
        "kind = \"plane-wave\"\namplitude = 1.5\nk = [1, 0, 0]",
        "kind = \"random\"\nkmax = 2\ndecay = 2.0",
    );
    let out = run_config(dir.path(), &text, &["check-invariants"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
