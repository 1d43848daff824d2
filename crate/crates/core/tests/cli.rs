use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perfohom"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn perfohom")
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = run(&["homogenize", "--config", "x.conf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_reports_config_stage() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.conf");
    let out = run(&["cell", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("ERROR config"));
}

#[test]
fn invalid_config_lists_every_issue() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "geometry.hole = disk\ngeometry.radius = 0.6\ncell.n = three\nbogus.key = 1\n").unwrap();
    let out = run(&["cell", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<_> = err.lines().collect();
    assert_eq!(lines.len(), 3, "{err}");
    assert!(lines.iter().all(|l| l.starts_with("ERROR config")));
    assert!(err.contains("compactly contained"));
}

#[test]
fn identity_cell_gives_identity_tensor() {
    let dir = tempfile::tempdir().unwrap();
    let conf = configs().join("cell_identity.conf");
    let out = run(&["cell", "--config", conf.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("effective_tensor.csv"));
    assert_eq!(&header[..4], ["b11", "b12", "b21", "b22"]);
    let b = &rows[0];
    for (v, want) in b[..4].iter().zip([1.0, 0.0, 0.0, 1.0]) {
        assert!((v - want).abs() < 1e-12, "{b:?}");
    }
    assert!((b[4] - 1.0).abs() < 1e-14 && (b[5] - 1.0).abs() < 1e-14);
    assert!(dir.path().join("config.echo").exists());
    assert!(dir.path().join("cell_report.txt").exists());
}

#[test]
fn macro_heat_decay_matches_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let conf = configs().join("macro_heat.conf");
    let out = run(&["macro", "--config", conf.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&dir.path().join("macro_summary.csv"));
    assert_eq!(header, ["time", "l2", "max"]);
    let last = rows.last().unwrap();
    assert!((last[0] - 0.05).abs() < 1e-14);
    let pi2 = std::f64::consts::PI.powi(2);
    let exact = 0.5 * (-2.0 * pi2 * 0.05f64).exp();
    assert!((last[1] / exact - 1.0).abs() < 5e-3, "{} vs {exact}", last[1]);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
}

#[test]
fn prescribed_table_path_is_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let table = "COEFF ny=2 ns=1\n\
        1 0 0 1\n1 0 0 1\n1 0 0 1\n\
        1 0 0 1\n1 0 0 1\n1 0 0 1\n\
        1 0 0 1\n1 0 0 1\n1 0 0 1\n";
    fs::write(dir.path().join("a.tab"), table).unwrap();
    let conf = dir.path().join("t.conf");
    fs::write(&conf, "geometry.hole = none\ncoefficient.family = tabulated\ncoefficient.table = a.tab\ncell.n = 8\ncell.ds = 1/8\n").unwrap();
    let res = dir.path().join("res");
    let out = run(&["cell", "--config", conf.to_str().unwrap(), "--out", res.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv(&dir.path().join("res/effective_tensor.csv"));
    assert!((rows[0][0] - 1.0).abs() < 1e-10 && (rows[0][3] - 1.0).abs() < 1e-10);
}

#[test]
fn null_study_writes_tables_and_pairings() {
    let dir = tempfile::tempdir().unwrap();
    let conf = configs().join("null_study.conf");
    for cmd in ["study", "pairing"] {
        let out = run(&[cmd, "--config", conf.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let (header, rows) = csv(&dir.path().join("study.csv"));
    assert_eq!(rows.len(), 3);
    let l2 = header.iter().position(|h| h == "l2_err").expect("l2_err column");
    assert!(rows.iter().all(|r| r[l2] < 1e-9));
    let orders = fs::read_to_string(dir.path().join("study_orders.csv")).unwrap();
    assert_eq!(orders.lines().count(), 3);
    let (ph, pr) = csv(&dir.path().join("pairing.csv"));
    assert_eq!(ph[0], "eps");
    assert_eq!(pr.len(), 3);
    assert!((pr[2][0] - 1.0 / 16.0).abs() < 1e-15);
}

#[test]
fn direct_reports_domain_measures() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("d.conf");
    fs::write(
        &conf,
        "geometry.hole = disk\ngeometry.radius = 0.25\ncoefficient.family = constant\n\
         coefficient.matrix = 1 0 0 1\ndirect.epsilon = 1/4\ndirect.m = 8\nmacro.t_final = 1/64\n\
         sampling.samples = 20000\nsampling.seed = 7\n",
    )
    .unwrap();
    let d = dir.path().join("d");
    let out = run(&["direct", "--config", conf.to_str().unwrap(), "--out", d.to_str().unwrap(), "--serial"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv(&dir.path().join("d/direct_domains.csv"));
    let r = &rows[0];
    let exact = 1.0 - 4.0 * std::f64::consts::PI * 0.0625 / 16.0;
    assert!((r[2] - exact).abs() < 1e-14);
    assert!((r[4] - exact).abs() < 5.0 * r[5] + 1e-12);
    assert!(dir.path().join("d/direct_k4_summary.csv").exists());
}
