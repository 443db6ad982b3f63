use std::path::Path;
use std::process::Command;

fn homoflow(args: &[&str], config: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_homoflow"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.cfg", "family.name = deltagamma\nfamily.delta = 0.99\nfamily.gamma = 1\neps_list = 0.1\ncheck.samples = 100\n");
    let out = homoflow(&["check"], &ok);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# homoflow-csv v1\n"));

    let bad = write(dir.path(), "bad.cfg", "family.name = deltagamma\nfamily.delta = 1.1\nfamily.gamma = 1\n");
    let out = homoflow(&["check"], &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("family.delta"));

    let unknown = write(dir.path(), "unknown.cfg", "family.name = identity\nbogus = 1\n");
    let out = homoflow(&["check"], &unknown);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = homoflow(&["check"], &dir.path().join("missing.cfg"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sim.cfg", "family.name = shear\nfamily.gamma = 0.5\neps_list = 0.25\nsimulate.points = 4\n");
    let a = dir.path().join("a.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_homoflow"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .status()
        .unwrap();
    assert!(status.success());
    let b = homoflow(&["simulate"], &cfg);
    assert!(b.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), b.stdout);
}

#[test]
fn homogenize_reports_cell_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.cfg", "family.name = deltagamma\nfamily.delta = 0.3\nfamily.gamma = 0.3\n");
    let out = homoflow(&["homogenize"], &cfg);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |k: &str| -> f64 { row[header.iter().position(|h| h == k).unwrap()].parse().unwrap() };
    assert!((get("sigma0") - 1.0).abs() < 1e-10);
    assert!((get("xi0_1") - 1.0).abs() < 1e-10);
    assert!(get("xi0_2").abs() < 1e-10);
}

#[test]
fn sweep_rejects_dynamic_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.cfg", "family.name = dynamic\n");
    assert_eq!(homoflow(&["sweep"], &cfg).status.code(), Some(2));
}
