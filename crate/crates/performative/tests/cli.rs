//! End-to-end checks of the command-line binary: every subcommand re-run
//! with the same config and seeds must produce byte-identical output files,
//! and error classes map to the documented exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_performative"))
}

fn work_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("performative-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_outputs(prefix: &Path) -> Vec<(String, Vec<u8>)> {
    let mut found = Vec::new();
    for ext in ["json", "csv"] {
        let path = prefix.with_extension(ext);
        if path.exists() {
            found.push((ext.to_string(), std::fs::read(&path).unwrap()));
        }
    }
    assert!(!found.is_empty(), "no outputs under {}", prefix.display());
    found
}

/// Runs one subcommand twice with identical arguments and asserts that every
/// produced file is byte-identical across the runs.
fn assert_deterministic(tag: &str, subcommand: &str, extra: &[&str]) {
    let dir = work_dir(tag);
    let prefix = dir.join("run");
    let mut args = vec![
        subcommand.to_string(),
        "--output".into(),
        prefix.to_str().unwrap().to_string(),
        "--seed".into(),
        "7".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));

    let first = bin().args(&args).output().unwrap();
    assert!(
        first.status.success(),
        "{subcommand} failed: {}",
        String::from_utf8_lossy(&first.stderr)
    );
    let bytes_first = read_outputs(&prefix);

    let second = bin().args(&args).output().unwrap();
    assert!(second.status.success());
    let bytes_second = read_outputs(&prefix);

    assert_eq!(
        bytes_first, bytes_second,
        "{subcommand}: outputs changed between identical runs"
    );
    println!("[acceptance] criterion 11 ({subcommand}): PASS");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn criterion_11_gen_is_deterministic() {
    assert_deterministic("gen", "gen", &["--source", "credit-like", "--n", "40"]);
}

#[test]
fn criterion_11_sweep_is_deterministic() {
    assert_deterministic(
        "sweep",
        "sweep",
        &[
            "--n",
            "200",
            "--repeats",
            "2",
            "--grid",
            "0,1",
            "--epochs",
            "4",
        ],
    );
}

#[test]
fn criterion_11_rerm_is_deterministic() {
    assert_deterministic(
        "rerm",
        "rerm",
        &[
            "--n",
            "200",
            "--a",
            "0.3",
            "--epochs",
            "4",
            "--max-iters",
            "4",
        ],
    );
}

#[test]
fn criterion_11_bounds_is_deterministic() {
    assert_deterministic("bounds", "bounds", &["--a", "0.5", "--rademacher", "0.08"]);
}

#[test]
fn criterion_11_lowerbound_is_deterministic() {
    assert_deterministic(
        "lowerbound",
        "lowerbound",
        &[
            "--a2", "0.3", "--a3", "0.9", "--a4", "0.0", "--trials", "100", "--lb-n", "20",
        ],
    );
}

#[test]
fn criterion_11_ingest_check_is_deterministic() {
    let dir = work_dir("ingest-src");
    let csv_prefix = dir.join("data");
    let gen = bin()
        .args([
            "gen",
            "--source",
            "credit-like",
            "--n",
            "30",
            "--seed",
            "3",
            "--output",
            csv_prefix.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(gen.status.success());
    let csv_path = csv_prefix.with_extension("csv");
    assert_deterministic(
        "ingest",
        "ingest-check",
        &[
            "--path",
            csv_path.to_str().unwrap(),
            "--label",
            "default",
            "--p-true",
            "p_true",
        ],
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let dir = work_dir("config");
    let config_path = dir.join("exp.toml");
    std::fs::write(
        &config_path,
        format!(
            r#"
seed = 11
repeats = 2
output = "{}"

[dataset]
n = 150

[drift]
family = "placebo"
grid = [0.0]

[train]
epochs = 3
"#,
            dir.join("from_config").to_str().unwrap().replace('\\', "/")
        ),
    )
    .unwrap();
    let out = bin()
        .args([
            "sweep",
            "--config",
            config_path.to_str().unwrap(),
            "--repeats",
            "1",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = std::fs::read_to_string(dir.join("from_config.json")).unwrap();
    assert!(json.contains("\"seed\": 11"), "config seed respected");
    assert!(json.contains("\"repeats\": 1"), "flag overrides config");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn exit_codes_for_error_classes() {
    // config error: unknown family
    let out = bin()
        .args(["sweep", "--family", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // config error: malformed config file
    let dir = work_dir("badcfg");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "no_such_field = true").unwrap();
    let out = bin()
        .args(["sweep", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // data error: missing csv file
    let out = bin()
        .args([
            "ingest-check",
            "--path",
            "/definitely/not/here.csv",
            "--label",
            "y",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // data error: non-binary label in an otherwise valid file
    let csv = dir.join("bad_labels.csv");
    std::fs::write(&csv, "x,y\n1.0,3\n").unwrap();
    let out = bin()
        .args([
            "ingest-check",
            "--path",
            csv.to_str().unwrap(),
            "--label",
            "y",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // numeric divergence: an absurd learning rate
    let out = bin()
        .args([
            "sweep",
            "--n",
            "100",
            "--repeats",
            "1",
            "--grid",
            "0.5",
            "--lr",
            "1e18",
            "--arch",
            "mlp",
            "--epochs",
            "40",
            "--output",
            dir.join("diverge").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let _ = std::fs::remove_dir_all(&dir);
}
