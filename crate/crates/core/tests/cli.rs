use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sleepmine");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_raw_logs(dir: &Path, sleep: &str) {
    fs::write(dir.join("sleep.csv"), sleep).unwrap();
    fs::write(
        dir.join("activity.csv"),
        "start,duration_min,kind\n\
         2021-03-01T08:00,30,walk\n\
         2021-03-01T17:00,45,run\n\
         2021-03-02T12:00,100,bike\n",
    )
    .unwrap();
    fs::write(
        dir.join("env.csv"),
        "at,temperature_f,humidity_pct\n\
         2021-03-01T23:10,61,45\n\
         2021-03-02T22:40,66,35\n\
         2021-03-03T23:00,70,55\n",
    )
    .unwrap();
    fs::write(dir.join("meals.csv"), "at\n2021-03-01T19:30\n2021-03-02T20:30\n2021-03-03T18:00\n").unwrap();
}

const SLEEP: &str = "onset,wake,latency_min,awake_min,awakenings_gt5,efficiency\n\
                     2021-03-01T23:00,2021-03-02T07:00,12,18,1,0.91\n\
                     2021-03-02T22:30,2021-03-03T06:45,25,30,2,0.84\n\
                     2021-03-03T23:10,2021-03-04T07:00,8,10,0,0.95\n";

fn ingest_args(dir: &Path) -> Vec<String> {
    ["sleep", "activity", "env", "meals"]
        .iter()
        .flat_map(|k| [format!("--{k}"), dir.join(format!("{k}.csv")).to_string_lossy().into_owned()])
        .chain(["--out".to_string(), dir.join("records.csv").to_string_lossy().into_owned()])
        .collect()
}

#[test]
fn ingest_valid_logs() {
    let tmp = tempfile::tempdir().unwrap();
    write_raw_logs(tmp.path(), SLEEP);
    let mut args = vec!["ingest".to_string()];
    args.extend(ingest_args(tmp.path()));
    let o = Command::new(BIN).args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("merged nights: 3"));
    assert!(stdout.contains("kept 3, dropped 0"));
    let csv = fs::read_to_string(tmp.path().join("records.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("night_date,"));
    assert!(lines[1].starts_with("2021-03-01,"));
}

#[test]
fn ingest_missing_file_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let o = run(&["ingest", "--sleep", s(&missing), "--out", s(&tmp.path().join("r.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn ingest_bad_rows_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = "onset,wake,latency_min,awake_min,awakenings_gt5,efficiency\n\
               2021-03-01T23:00,2021-03-02T07:00,abc,18,1,0.91\n\
               2021-03-02T22:30,2021-03-03T06:45,25,30,2,1.5\n";
    write_raw_logs(tmp.path(), bad);
    let mut args = vec!["ingest".to_string()];
    args.extend(ingest_args(tmp.path()));
    let o = Command::new(BIN).args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("line 3"), "{err}");
}

#[test]
fn ingest_without_consecutive_nights_writes_empty_file() {
    let tmp = tempfile::tempdir().unwrap();
    let sparse = "onset,wake,latency_min,awake_min,awakenings_gt5,efficiency\n\
                  2021-03-01T23:00,2021-03-02T07:00,12,18,1,0.91\n\
                  2021-03-05T23:00,2021-03-06T07:00,12,18,1,0.91\n";
    write_raw_logs(tmp.path(), sparse);
    let mut args = vec!["ingest".to_string()];
    args.extend(ingest_args(tmp.path()));
    let o = Command::new(BIN).args(&args).output().unwrap();
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
    let csv = fs::read_to_string(tmp.path().join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn synth_then_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let records = tmp.path().join("records.csv");
    let out = tmp.path().join("reports");
    let o = run(&["synth", "--seed", "3", "--n-days", "365", "--out", s(&records)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["analyze", "--records", s(&records), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let names: Vec<String> =
        fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("screen_")).count(), 8);
    assert_eq!(names.iter().filter(|n| n.starts_with("joint_") && n.ends_with(".svg")).count(), 40);
    for f in ["effects.csv", "effects.txt", "summary.txt", "screen_latency_min.svg", "joint_start_temp_efficiency.csv"]
    {
        assert!(names.iter().any(|n| n == f), "{f} missing");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    for line in summary.lines().skip(1) {
        let parts: Vec<&str> = line.split(" | ").collect();
        assert_eq!(parts.len(), 4, "{line}");
        assert!(parts[1].starts_with("C=") && parts[2].starts_with("dmean=") && parts[3].starts_with("p="));
    }
}

#[test]
fn alpha_zero_gives_empty_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let records = tmp.path().join("records.csv");
    assert!(run(&["synth", "--seed", "1", "--n-days", "120", "--out", s(&records)]).status.success());
    let o = run(&["analyze", "--records", s(&records), "--alpha", "0", "--out-dir", s(tmp.path())]);
    assert!(o.status.success());
    let summary = fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn one_night_is_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let records = tmp.path().join("records.csv");
    assert!(run(&["synth", "--n-days", "2", "--out", s(&records)]).status.success());
    let text = fs::read_to_string(&records).unwrap();
    let one: Vec<&str> = text.lines().take(2).collect();
    fs::write(&records, one.join("\n") + "\n").unwrap();
    let o = run(&["analyze", "--records", s(&records), "--out-dir", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_records_is_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let records = tmp.path().join("records.csv");
    fs::write(&records, "night_date,onset\n2021-01-01,x\n").unwrap();
    let o = run(&["analyze", "--records", s(&records), "--out-dir", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_is_reproducible_and_checks_spec() {
    let a = run(&["synth", "--seed", "5", "--n-days", "30"]);
    let b = run(&["synth", "--seed", "5", "--n-days", "30"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 31);

    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.toml");
    fs::write(&spec, "[input_marginals.start_temp]\nCold = 0.9\n").unwrap();
    let o = run(&["synth", "--spec", s(&spec)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("start_temp"));
}
