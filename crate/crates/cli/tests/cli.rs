use std::path::{Path, PathBuf};
use std::process::Command;

use bridge_exp::config::{ExperimentConfig, Kind};
use bridge_exp::run::{run, RunOptions};
use bridge_exp::table_io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridge-exp"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run_cli(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    bin()
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn lasso_config_gives_six_curves_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("lasso_amse.toml");
    let out = run_cli("amse", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("amse_curve.csv");
    let first = std::fs::read(&csv).unwrap();

    let table = table_io::read(&csv).unwrap();
    assert_eq!(table.kind, Kind::AmseCurve);
    assert_eq!(table.rows.len(), 3 * 2 * 26);

    let out = run_cli("amse", &cfg, dir.path(), &["--workers", "1"]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&csv).unwrap());

    let figs = dir.path().join("figs");
    let out = bin()
        .arg("figure")
        .arg("--csv")
        .arg(&csv)
        .arg("--out")
        .arg(&figs)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svgs: Vec<_> = std::fs::read_dir(&figs)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert_eq!(svgs.len(), 6);
}

#[test]
fn csv_has_schema_header_and_status_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("phase.toml");
    let out = run_cli("phase", &cfg, dir.path(), &[]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("#schema=1"));
    assert_eq!(lines.next(), Some("#kind=phase"));
    assert_eq!(lines.next(), Some("q,epsilon,m_value,chi_star_star,status"));
    assert_eq!(lines.count(), 2 * 21);
}

#[test]
fn empty_sigma_grid_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "[grid]\nq = [1.0]\ndelta = [2.0]\nepsilon = [0.3]\nsigma_w = []\n",
    );
    let out = run_cli("amse", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("amse_curve.csv").exists());
}

#[test]
fn failed_records_set_exit_code_but_run_continues() {
    let dir = tempfile::tempdir().unwrap();
    // delta = 0.3 is below the LASSO phase transition at eps = 0.5
    let cfg = write_config(
        dir.path(),
        "mixed.toml",
        "[grid]\nq = [1.0]\ndelta = [0.3, 2.0]\nepsilon = [0.5]\nsigma_w = [0.0, 0.1]\n",
    );
    let out = run_cli("amse", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let t = table_io::read(&dir.path().join("amse_curve.csv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    let status = t.column("status").unwrap();
    let ok = t.rows.iter().filter(|r| r[status] == "OK").count();
    assert_eq!(ok, 3);
}

#[test]
fn bridge_first_order_degrades_as_delta_decreases() {
    let mut cfg = ExperimentConfig::load(&repo_config("bridge_expansion.toml")).unwrap();
    cfg.validate(Kind::ExpansionCheck).unwrap();
    let table = run(&cfg, RunOptions::default());
    assert!(table.records.iter().all(|r| r.is_ok()));
    let col = |name: &str| table.columns.iter().position(|c| *c == name).unwrap();
    let (di, si, gi) = (col("delta"), col("sigma_w"), col("gap_first"));
    for sigma in ["0.05", "0.1", "0.25"] {
        let mut gaps: Vec<(f64, f64)> = table
            .records
            .iter()
            .filter(|r| r.cells[si] == sigma)
            .map(|r| (r.cells[di].parse().unwrap(), r.cells[gi].parse().unwrap()))
            .collect();
        gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(gaps.len(), 4);
        assert!(
            gaps.windows(2).all(|w| w[0].1 > w[1].1),
            "sigma_w={sigma}: {gaps:?}"
        );
    }
}

#[test]
fn simulation_record_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.toml",
        "seed = 3\nreplicates = 3\namp = true\niterations = 300\nlambda_points = 8\n\
         [grid]\nq = [1.0, 1.5]\ndelta = [1.5]\nepsilon = [0.4]\nsigma_w = [0.1]\np = [100, 150]\n",
    );
    let out = run_cli("simulate", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("finite_sample.csv");
    let first = std::fs::read(&csv).unwrap();
    let t = table_io::read(&csv).unwrap();
    assert_eq!(t.rows.len(), 2 * 2 * 3);
    let gap = t.column("amp_gap").unwrap();
    assert!(t.rows.iter().all(|r| !r[gap].is_empty()));

    let out = run_cli("simulate", &cfg, dir.path(), &["--workers", "2"]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&csv).unwrap());

    let out = run_cli("simulate", &cfg, dir.path(), &["--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_ne!(first, std::fs::read(&csv).unwrap());
}

#[test]
fn amp_trace_rows_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "trace.toml",
        "replicates = 2\niterations = 5\n\
         [grid]\nq = [1.5]\ndelta = [2.0]\nepsilon = [0.4]\nsigma_w = [0.1]\np = [200]\n",
    );
    let out = run_cli("amp-trace", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table_io::read(&dir.path().join("amp_trace.csv")).unwrap();
    assert_eq!(t.rows.len(), 2 * 6);
    let (ti, mi, si) = (
        t.column("t").unwrap(),
        t.column("mse").unwrap(),
        t.column("mse_theory").unwrap(),
    );
    let row0 = &t.rows[0];
    assert_eq!(row0[ti], "0");
    assert_eq!(row0[si], "0.4");
    assert!(t.num(row0, mi).unwrap() > 0.0);
}

#[test]
fn expansion_rows_report_regime() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "exp.toml",
        "[grid]\nq = [1.0, 2.0]\ndelta = [2.0]\nepsilon = [0.3]\nsigma_w = [0.0, 0.05]\n",
    );
    let out = run_cli("expand", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let t = table_io::read(&dir.path().join("expansion_check.csv")).unwrap();
    let r = t.column("regime").unwrap();
    let regimes: Vec<&str> = t.rows.iter().map(|row| row[r].as_str()).collect();
    assert_eq!(
        regimes,
        ["LASSO_BOUNDED_AWAY", "LASSO_BOUNDED_AWAY", "Q_EQ_2", "Q_EQ_2"]
    );
}

#[test]
fn figure_rejects_unversioned_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_config(dir.path(), "plain.csv", "q,epsilon\n1,0.5\n");
    let out = bin()
        .arg("figure")
        .arg("--csv")
        .arg(&csv)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
