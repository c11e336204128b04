//! End-to-end checks of the binary: flag validation, exit codes, JSON
//! output and run-directory behavior.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn steepflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steepflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("steepflow-cli-{}-{tag}", std::process::id()));
    fs::remove_dir_all(&dir).ok();
    dir
}

#[test]
fn geometry_reports_the_depth2_metric() {
    let out = steepflow(&["geometry", "--q", "1", "--depth", "2", "--lambda", "3", "--x", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("\"metric_inverse\": 5.0000000000000000e0"),
        "{text}"
    );
    assert!(text.contains("\"stability\": \"bregman_full_domain\""));
}

#[test]
fn unknown_flag_exits_one_with_usage() {
    let out = steepflow(&["geometry", "--nonsense", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn invalid_q_names_the_constraint() {
    let dir = temp_dir("badq");
    let out = steepflow(&[
        "run-regression",
        "--q",
        "3",
        "--steps",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("[1, 2]"), "{err}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn help_lists_flags_for_every_subcommand() {
    for sub in [
        "run-regression",
        "run-classification",
        "saddle-escape",
        "balance-table",
        "equivalence",
        "geometry",
        "check",
    ] {
        let out = steepflow(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help failed");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.contains("--help"), "{sub}: {text}");
        if sub != "geometry" && sub != "check" {
            assert!(text.contains("default"), "{sub} help lacks defaults");
        }
    }
}

#[test]
fn run_regression_writes_run_directory_and_respects_force() {
    let dir = temp_dir("reg");
    let args = [
        "run-regression",
        "--n",
        "6",
        "--k",
        "8",
        "--s",
        "2",
        "--depth",
        "2",
        "--q",
        "1",
        "--eta",
        "1e-3",
        "--steps",
        "200",
        "--record-every",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ];
    let out = steepflow(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // without --force a run-* subdirectory is created
    let subdirs: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(subdirs.len(), 1);
    assert!(subdirs[0]
        .file_name()
        .unwrap()
        .to_string_lossy()
        .starts_with("run-"));
    assert!(subdirs[0].join("summary.json").exists());
    assert!(subdirs[0].join("balance_table.csv").exists());

    // --force writes into the directory itself and reruns byte-identically
    let forced = temp_dir("reg-forced");
    let mut forced_args: Vec<&str> = args.to_vec();
    let last = forced_args.len() - 1;
    forced_args[last] = forced.to_str().unwrap();
    forced_args.push("--force");
    assert!(steepflow(&forced_args).status.success());
    let first = fs::read_to_string(forced.join("summary.json")).unwrap();
    assert!(steepflow(&forced_args).status.success());
    let second = fs::read_to_string(forced.join("summary.json")).unwrap();
    assert_eq!(first, second);
    fs::remove_dir_all(&dir).ok();
    fs::remove_dir_all(&forced).ok();
}

#[test]
fn run_classification_writes_margin_profile() {
    let dir = temp_dir("cls");
    let out = steepflow(&[
        "run-classification",
        "--n",
        "8",
        "--k",
        "10",
        "--s",
        "2",
        "--depth",
        "2",
        "--q",
        "1",
        "--eta",
        "0.01",
        "--steps",
        "300",
        "--record-every",
        "100",
        "--out",
        dir.to_str().unwrap(),
        "--force",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("margin"), "{stdout}");
    let margin_files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("margin_") && n.ends_with(".csv"))
        .collect();
    assert_eq!(margin_files.len(), 1);
    assert!(dir.join("margins.json").exists());
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn spec_file_maps_keys_to_flags() {
    let dir = temp_dir("specfile");
    fs::create_dir_all(&dir).unwrap();
    let spec = dir.join("geom.spec");
    fs::write(&spec, "q=1\ndepth=2\nlambda=3\nx=4\n").unwrap();
    let out = steepflow(&["geometry", "--spec", spec.to_str().unwrap()]);
    // geometry has no --spec flag of its own; expansion happens before parsing
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("5.0000000000000000e0"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn check_subcommand_passes() {
    let out = steepflow(&["check", "--instances", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("PASS").count(), 3, "{text}");
    assert_eq!(text.matches("FAIL").count(), 0, "{text}");
}
