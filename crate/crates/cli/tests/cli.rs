use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxsampler"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn plan_writes_zeta_consistent_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("strongly_convex_d4.cfg");
    let o = run(&["plan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("plan.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_digest="));
    assert_eq!(
        lines.next().unwrap(),
        "regime,eta,T,zeta,delta,metric,mode,rounds"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let t: f64 = row[2].parse().unwrap();
    let zeta: f64 = row[3].parse().unwrap();
    let delta: f64 = row[4].parse().unwrap();
    assert!((zeta * t - delta / 2.0).abs() <= 1e-15);
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("conc_alpha1_d8.cfg");
    let o = run(
        &[
            "verify-conc",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "7",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("tail_report.csv")).unwrap();
    assert!(text.lines().next().unwrap().ends_with(" seed=7"));
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = fixture("conc_alpha1_d8.cfg");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(
            &[
                "verify-conc",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "7",
            ],
            d.path(),
        );
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("tail_report.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn unknown_key_exits_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "seed = 1\n[target]\nname = huber\nwidht = 1\n");
    let o = run(&["plan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("widht"), "{err}");
}

#[test]
fn invalid_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[target]\nname = isotropic_gaussian\ndim = 2\n[assumption]\nregime = slc\nbeta = 1\nkl_init = 1\n[plan]\ndelta = 1.5\n",
    );
    let o = run(&["plan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 9"));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["plan"], dir.path()).status.code(), Some(1));
    assert_eq!(
        run(&["plan", "--config", "/nonexistent/x.cfg"], dir.path())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn failed_check_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "seed = 5\n[target]\nname = isotropic_gaussian\ndim = 8\n[conc]\neta = 0.01\nn_samples = 200000\nrate_scale = 10\n",
    );
    let o = run(
        &["verify-conc", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(dir.path().join("tail_report.csv")).unwrap();
    assert!(text.contains(",false"));
}

#[test]
fn verify_rgo_report_passes_on_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("gaussian_d4.cfg");
    let o = run(
        &["verify-rgo", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("rgo_report.csv")).unwrap();
    let row = text
        .lines()
        .find(|l| l.starts_with("mean_proposals,"))
        .unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!(v <= 4.0);
    assert!(text.lines().skip(2).all(|l| l.ends_with(",true")));
}

#[test]
fn benchmark_rejects_non_gaussian_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "[target]\nname = huber\ndim = 2\nwidth = 1\n[assumption]\nregime = pi\nc_pi = 0.25\nchi2_init = 1\n[plan]\ndelta = 0.2\n",
    );
    let o = run(
        &["benchmark", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}
