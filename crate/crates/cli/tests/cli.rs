use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ulofdma_cli::output::{self, CdfRow, EpochRow, SummaryRow, SweepRow};
use ulofdma_core::harness::topology_for_run;
use ulofdma_core::{run_single, ExperimentConfig, PolicyKind, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ulofdma"))
}

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, body).unwrap();
    p
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} exited {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = repo_configs().join("feasible10.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        run_ok(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
            "--epochs",
            "300",
        ]);
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert_eq!(fa.len(), 6, "{:?}", fa.iter().map(|f| &f.0).collect::<Vec<_>>());
    assert_eq!(fa, fb);
    assert_eq!(fs::read(a.join("config.json")).unwrap(), fs::read(b.join("config.json")).unwrap());
}

#[test]
fn selftest_passes() {
    let text = run_ok(&["selftest", "--epochs", "200"]);
    assert!(text.contains("DPP"));
    assert_eq!(text.matches(": ok").count(), 4, "{text}");
}

#[test]
fn missing_config_flag_prints_usage() {
    let out = bin().args(["run"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(err.contains("--config"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["cdf", "--config", "x.json", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreadable_or_invalid_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let missing = bin()
        .args(["run", "--config", "/nonexistent/cfg.json", "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = write_config(tmp.path(), r#"{"stations": 0, "epochs": 5, "policies": ["srm"]}"#);
    let out = bin()
        .args(["run", "--config", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "partial output left behind");
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"stations": 4, "k_values": [], "epochs": 5, "policies": ["srm", "mm"]}"#);
    let out = tmp.path().join("out");
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap(), "policy,K,min_rate,sum_rate\n");
}

#[test]
fn sweep_rows_cover_every_policy_and_size() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"stations": 4, "epochs": 20, "policies": ["srm", "pf"]}"#);
    let out = tmp.path().join("out");
    run_ok(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--k", "2,5,3"]);
    let rows: Vec<SweepRow> = output::read_csv(&out.join("sweep.csv")).unwrap();
    let ks: Vec<(String, usize)> = rows.iter().map(|r| (r.policy.clone(), r.k)).collect();
    assert_eq!(
        ks,
        vec![
            ("SRM".into(), 2),
            ("PF".into(), 2),
            ("SRM".into(), 5),
            ("PF".into(), 5),
            ("SRM".into(), 3),
            ("PF".into(), 3)
        ]
    );
}

#[test]
fn one_epoch_one_station_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"stations": 1, "epochs": 1, "policies": ["dpp"]}"#);
    let out = tmp.path().join("out");
    run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let rows: Vec<EpochRow> = output::read_csv(&out.join("epochs_dpp.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].epoch, rows[0].station), (0, 0));
    let text = fs::read_to_string(out.join("epochs_dpp.csv")).unwrap();
    assert!(text.starts_with("epoch,station,rate_bits,power_mw,q,z,g\n"));
}

#[test]
fn summary_csv_matches_in_memory_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"{"stations": 6, "epochs": 250, "policies": ["esrm", "pf", "wmm"], "seed": 3}"#;
    let cfg_path = write_config(tmp.path(), body);
    let out = tmp.path().join("out");
    run_ok(&["run", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    let rows: Vec<SummaryRow> = output::read_csv(&out.join("summary.csv")).unwrap();
    let cfg: ExperimentConfig = serde_json::from_str(body).unwrap();
    let topo = topology_for_run(&cfg).unwrap();
    let mut expected = Vec::new();
    for policy in [PolicyKind::Esrm, PolicyKind::Pf, PolicyKind::Wmm] {
        expected.push(run_single(&cfg, &topo, policy, cfg.channel_seed(0), RunOptions::default()).unwrap().summary);
    }
    assert_eq!(rows, output::summary_rows(&expected));
    for (row, back) in rows.iter().zip(expected.iter().flat_map(|s| s.avg_rate.iter())) {
        assert_eq!(row.avg_rate_bits, *back);
    }
}

#[test]
fn resolved_config_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = repo_configs().join("table1.json");
    run_ok(&[
        "cdf",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--topologies",
        "3",
        "--epochs",
        "30",
        "--v",
        "50",
    ]);
    let echoed: ExperimentConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed.topologies, 3);
    assert_eq!(echoed.epochs, 30);
    assert_eq!(echoed.constraints.v, 50.0);
    assert_eq!(echoed.mcs, ulofdma_core::McsTable::default());

    let rows: Vec<CdfRow> = output::read_csv(&out.join("cdf.csv")).unwrap();
    // 4 policies, 2 metrics, 3 topologies.
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| r.cdf_level > 0.0 && r.cdf_level <= 1.0));
    assert!(out.join("summary.txt").exists());
}

#[test]
fn checked_run_reports_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"stations": 5, "epochs": 100, "policies": ["dpp", "srm"]}"#);
    let out = tmp.path().join("out");
    let text = run_ok(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--checks"]);
    assert!(text.contains("0 drift violations"), "{text}");
}

#[test]
fn k_list_outside_sweep_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"stations": 5, "epochs": 10, "policies": ["srm"]}"#);
    let out = bin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "--k", "3,4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
