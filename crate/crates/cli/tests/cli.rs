use std::path::Path;
use std::process::Command;

fn semiclassical(dir: &Path, args: &[&str], config: &str) -> std::process::Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_semiclassical"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

/// Data rows of a CSV as fields, header line dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn hesd_writes_the_norm_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(dir.path(), &["hesd"], "t_final = 1\n");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = dir.path().join("out/trajectory.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("# gamma = 1e0\n"));
    assert!(text.contains("\nt,sigma,P,X,S,sigma1,Z1_p,Z1_x,D_pp,D_px,D_xx,status\n"));
    let last = rows(&path).pop().unwrap();
    let sigma: f64 = last[1].parse().unwrap();
    assert!((sigma - 1.62196).abs() < 5e-6, "{sigma}");
    assert_eq!(last[11], "ok");
}

#[test]
fn negative_atom_number_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(dir.path(), &["hesd"], "N = -1\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N"));
}

#[test]
fn conservative_norm_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(dir.path(), &["hesd"], "lambda = 0\nt_final = 2\n");
    assert!(out.status.success());
    for row in rows(&dir.path().join("out/trajectory.csv")) {
        let sigma: f64 = row[1].parse().unwrap();
        assert!((sigma - 0.5).abs() < 1e-12, "{sigma}");
    }
}

#[test]
fn zero_final_time_returns_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(
        dir.path(),
        &["asymptotic"],
        "t_final = 0\nn_points = 256\nbox = 16\n",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = rows(&dir.path().join("out/asymptotic.csv"));
    assert_eq!(data.len(), 256);
    let dx = 16.0 / 256.0;
    let norm: f64 = data.iter().map(|r| r[4].parse::<f64>().unwrap() * dx).sum();
    assert!((norm - 0.5).abs() < 1e-10, "{norm}");
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "t_final = 0.2\nn_points = 512\nbox = 16\n";
    let read = || std::fs::read(dir.path().join("out/direct.csv")).unwrap();
    assert!(semiclassical(dir.path(), &["direct"], cfg).status.success());
    let first = read();
    assert!(semiclassical(dir.path(), &["direct"], cfg).status.success());
    assert_eq!(first, read());
}

#[test]
fn compare_rejects_a_single_hbar() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(dir.path(), &["compare", "--hbar-list", "0.1"], "");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_flags_the_exact_linear_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(
        dir.path(),
        &["compare", "--hbar-list", "0.2,0.1,0.05"],
        "lambda = 0\nkappa = 0\np0 = 0.3\nt_final = 0.5\n",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path = dir.path().join("out/convergence.csv");
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .contains("# regime = exact\n"));
    assert_eq!(rows(&path).len(), 3);
}

#[test]
fn unstable_time_step_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(dir.path(), &["direct"], "pde_dt = 0.01\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = semiclassical(dir.path(), &["hesd"], "colour = red\n");
    assert_eq!(out.status.code(), Some(2));
}
