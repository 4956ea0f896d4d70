use std::path::Path;
use std::process::Command;

use trotter_core::experiment::{run_error_vs_m_multi_t, ExperimentConfig, CSV_HEADER};

const CONFIG: &str = r#"{
  "experiment_id": "cli_smoke",
  "system": { "L": 3, "seed": 5 },
  "time": [0.5, 1.0],
  "formula": { "kind": "suzuki", "k": 1 },
  "method": "richardson",
  "m_values": [1, 2, 3],
  "measurement": { "kind": "incoherent", "N": 200 }
}"#;

fn trotter(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_trotter")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let status = trotter(&["run", &config, "--seed", "9", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn seed_changes_measured_rows_only() {
    let config = ExperimentConfig::from_json(CONFIG).unwrap();
    let a = run_error_vs_m_multi_t(&config, 1).unwrap();
    let b = run_error_vs_m_multi_t(&config, 2).unwrap();
    for (x, y) in a.details.iter().zip(&b.details) {
        assert_eq!(x.exact, y.exact);
        assert_eq!(x.noiseless_estimate, y.noiseless_estimate);
    }
    assert_ne!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
}

#[test]
fn stdout_matches_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("o.csv");
    let stdout = trotter(&["run", &config, "--seed", "4"]).stdout;
    assert!(trotter(&["run", &config, "--seed", "4", "--out", out.to_str().unwrap()]).status.success());
    assert_eq!(stdout, std::fs::read(out).unwrap());
}

#[test]
fn report_summarizes_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &CONFIG.replace(r#"{ "kind": "incoherent", "N": 200 }"#, r#"{ "kind": "exact" }"#));
    let out = dir.path().join("o.csv");
    assert!(trotter(&["run", &config, "--out", out.to_str().unwrap()]).status.success());
    let report = trotter(&["report", out.to_str().unwrap()]);
    assert!(report.status.success());
    let text = String::from_utf8(report.stdout).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert!(text.lines().skip(1).all(|l| l.starts_with("cli_smoke,")));
}

#[test]
fn invalid_configs_exit_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        CONFIG.replace(r#""m_values": [1, 2, 3]"#, r#""m_values": []"#),
        CONFIG.replace(r#""method": "richardson""#, r#""method": "interpolation""#),
        CONFIG.replace(r#""experiment_id""#, r#""unknown_key": 1, "experiment_id""#),
    ] {
        let config = write_config(dir.path(), &bad);
        let output = trotter(&["run", &config]);
        assert_eq!(output.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&output.stderr).starts_with("error:"));
    }
}
