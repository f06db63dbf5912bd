use std::path::Path;
use std::process::Command;

fn dhym(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dhym")).args(args).output().expect("run dhym")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from\n{report}"))
        .to_string()
}

#[test]
fn phase_of_the_calibrated_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[background]\nn = 1\npoints = 16\nalpha = [1.0]\n");
    let out = dir.path().join("out");
    let o = dhym(&["phase", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("phase.txt")).unwrap();
    let theta: f64 = value(&report, "thetaHat").parse().unwrap();
    assert!((theta - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
    assert_eq!(value(&report, "hypercritical"), "true");
}

#[test]
fn distance_of_a_constant_shift() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[background]\nn = 1\npoints = 16\nalpha = [1.0]\n\n[endpoints]\nphi0 = \"0\"\nphi1 = \"0.25\"\n\n[schedule]\nepsilon = [0.4, 0.2, 0.1]\n",
    );
    let out = dir.path().join("out");
    let o = dhym(&["distance", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("distance.txt")).unwrap();
    let d: f64 = value(&report, "d").parse().unwrap();
    let lb: f64 = value(&report, "lowerBound").parse().unwrap();
    let exact = 0.25 * 2f64.powf(0.25) * std::f64::consts::TAU;
    assert!((d - exact).abs() < 1e-10, "{d} vs {exact}");
    assert!((lb - exact).abs() < 1e-10);
    assert!(out.join("geodesic.tph").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[background]\nn = 1\npoints = 16\nalpha = [1.0]\n[solver]\ndamping = 7\n");
    assert_eq!(dhym(&["phase", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(dhym(&["phase"]).status.code(), Some(2));
    assert_eq!(dhym(&["no-such-command"]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(dhym(&["phase", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn non_member_endpoint_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[background]\nn = 1\npoints = 16\nalpha = [1.0]\n\n[endpoints]\nphi0 = \"0\"\nphi1 = \"12*sin(x1)\"\n",
    );
    let out = dir.path().join("out");
    let o = dhym(&["geodesic", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn loop_closure_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[background]\nn = 1\npoints = 16\nalpha = [1.0]\n\n[run]\nseed = 7\n");
    let out = dir.path().join("out");
    let o = dhym(&["jfun", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("jfun.txt")).unwrap();
    let scale: f64 = value(&report, "maxAbsJ").parse().unwrap();
    let c1: f64 = value(&report, "closureDefect").parse().unwrap();
    assert!(c1 < 1e-2 * scale, "{c1} vs {scale}");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let c = dhym_cli::config::RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        c.background().unwrap();
        n += 1;
    }
    assert!(n >= 3);
}
