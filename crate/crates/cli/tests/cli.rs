use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ramc_cli::output::{Record, RecordFile};

const BIN: &str = env!("CARGO_BIN_EXE_ramc");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn ramc(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &str = r#"
name = "small"
rates = [["0.05", "0.3"]]

[[channels]]
id = "bsc"
inputs = 2
outputs = 2
probs = ["0.9", "0.1", "0.1", "0.9"]

[region]
pairs = [{ rates = [1], target = "bsc" }]

[defaults]
N = 12
trials = 300
seed = 11
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn bound_prints_a_record_when_no_file_is_given() {
    let cfg = configs().join("bsc_pair.toml");
    let out = ramc(&["bound", "-c", cfg.to_str().unwrap(), "--N", "40"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file = RecordFile::parse(&(stdout(&out) + "\n")).unwrap();
    match file.record {
        Record::Bound(b) => {
            assert_eq!(b.n, 40);
            assert!(b.clamped_bound > 0.0 && b.clamped_bound <= 1.0);
        }
        other => panic!("unexpected record {other:?}"),
    }
}

#[test]
fn every_example_command_round_trips_through_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let cfg = cfg.to_str().unwrap();
    let runs: [&[&str]; 5] = [
        &["bound"],
        &["exponent-limit"],
        &["region"],
        &["simulate"],
        &["sweep", "--N", "5,10,20"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let record = dir.path().join(format!("r{i}.json"));
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["-c", cfg, "--record", record.to_str().unwrap()]);
        let out = ramc(&full);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let check = ramc(&["inspect", record.to_str().unwrap()]);
        assert_eq!(check.status.code(), Some(0), "{args:?}");
        assert!(stdout(&check).contains("round trip ok"));
    }
}

#[test]
fn tampered_record_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let record = dir.path().join("r.json");
    let out = ramc(&["bound", "-c", cfg.to_str().unwrap(), "--record", record.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&record).unwrap();
    std::fs::write(&record, text.replace("\"format\": \"ramc-record/1\"", "\"format\": \"x\"")).unwrap();
    assert_eq!(ramc(&["inspect", record.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&record, text.replacen("  ", "    ", 1)).unwrap();
    assert_eq!(ramc(&["inspect", record.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn undefined_id_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("target = \"bsc\"", "target = \"nope\""));
    let record = dir.path().join("r.json");
    let out = ramc(&["bound", "-c", cfg.to_str().unwrap(), "--record", record.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    assert!(!record.exists());
}

#[test]
fn malformed_probabilities_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"0.9\", \"0.1\", \"0.1\"", "\"0.9\", \"0.2\", \"0.1\""));
    assert_eq!(ramc(&["bound", "-c", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write_config(dir.path(), &SMALL.replace("\"0.9\", \"0.1\"", "\"0.9\", \"one\""));
    assert_eq!(ramc(&["bound", "-c", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn size_guard_exits_3_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("\"0.3\"", "\"3.0\""));
    let csv = dir.path().join("t.csv");
    let out = ramc(&[
        "simulate",
        "-c",
        cfg.to_str().unwrap(),
        "--N",
        "40",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!csv.exists());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ramc(&["bound"]).status.code(), Some(2));
    assert_eq!(ramc(&["frobnicate"]).status.code(), Some(2));
    let cfg = configs().join("bsc_pair.toml");
    let out = ramc(&["region", "-c", cfg.to_str().unwrap(), "--csv", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let record = dir.path().join(format!("sim{run}.json"));
        let csv = dir.path().join(format!("sim{run}.csv"));
        let trace = dir.path().join(format!("trace{run}.json"));
        let out = ramc(&[
            "simulate",
            "-c",
            cfg.to_str().unwrap(),
            "--record",
            record.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push([record, csv, trace].map(|p| std::fs::read(p).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0][1].clone()).unwrap();
    assert!(csv.starts_with("rates,channel,in_region,"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn sweep_csv_has_one_row_per_length() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let csv = dir.path().join("s.csv");
    let record = dir.path().join("s.json");
    let out = ramc(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "--N",
        "10:10:50",
        "--csv",
        csv.to_str().unwrap(),
        "--record",
        record.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "N,log_bound,clamped_bound");
    let ns: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ns, ["10", "20", "30", "40", "50"]);
}

#[test]
fn relative_config_falls_back_to_config_dir() {
    let cwd = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["exponent", "-c", "bsc_pair.toml"])
        .current_dir(cwd.path())
        .env("RAMC_CONFIG_DIR", configs())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let missing = Command::new(BIN)
        .args(["exponent", "-c", "bsc_pair.toml"])
        .current_dir(cwd.path())
        .env_remove("RAMC_CONFIG_DIR")
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn class_config_runs_in_class_mode() {
    let cfg = configs().join("adder_classes.toml");
    let out = ramc(&["exponent-limit", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file = RecordFile::parse(&(stdout(&out) + "\n")).unwrap();
    assert!(file.scenario.classes.is_some());
    assert!(matches!(file.record, Record::ExponentLimit(l) if l.value > 0.0));
}
