//! Source-file parsing, temporal merge into [`DayRecord`]s, and the
//! consecutive-nights filter.
//!
//! All four inputs are UTF-8 CSV with a header row and ISO-8601 local
//! timestamps (`2021-03-01T23:10` or `2021-03-01T23:10:00`).

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use thiserror::Error;

use crate::model::{validate_day_record, ActivityEvent, DayRecord, EnvSample, MealEvent, SleepSession};

/// A problem with one data row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub column: Option<String>,
    pub reason: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(c) => write!(f, "line {}, column `{c}`: {}", self.line, self.reason),
            None => write!(f, "line {}: {}", self.line, self.reason),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {} bad row(s):\n{}", .errors.len(), join_rows(.errors))]
    Parse { path: PathBuf, errors: Vec<RowError> },
    #[error("sleep sessions overlap: {first_onset} .. {first_wake} and {second_onset}")]
    Overlap { first_onset: NaiveDateTime, first_wake: NaiveDateTime, second_onset: NaiveDateTime },
    #[error("more than one record for night {0}")]
    DuplicateDate(NaiveDate),
    #[error("min_run must be at least 2, got {0}")]
    MinRun(usize),
    #[error("writing records: {0}")]
    Write(String),
}

fn join_rows(errors: &[RowError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

/// Tunables for the temporal merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergePolicy {
    /// Max distance from sleep onset of a "starting" environment sample.
    pub env_window_min: f64,
    /// How far back from onset meals are considered.
    pub meal_lookback_h: f64,
    pub week_window_days: u32,
}

impl Default for MergePolicy {
    fn default() -> Self {
        Self { env_window_min: 30.0, meal_lookback_h: 24.0, week_window_days: 7 }
    }
}

const TS_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"];
const TS_OUT: &str = "%Y-%m-%dT%H:%M:%S";

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TS_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(t: NaiveDateTime) -> String {
    t.format(TS_OUT).to_string()
}

/// Column-aware field access for one CSV record.
struct Row<'a> {
    rec: &'a csv::StringRecord,
    headers: &'a [String],
    line: u64,
}

impl Row<'_> {
    fn err(&self, col: usize, reason: impl Into<String>) -> RowError {
        RowError { line: self.line, column: Some(self.headers[col].clone()), reason: reason.into() }
    }

    fn raw(&self, col: usize) -> &str {
        self.rec.get(col).unwrap_or("").trim()
    }

    fn ts(&self, col: usize) -> Result<NaiveDateTime, RowError> {
        parse_timestamp(self.raw(col)).ok_or_else(|| self.err(col, format!("bad timestamp `{}`", self.raw(col))))
    }

    fn num(&self, col: usize) -> Result<f64, RowError> {
        match self.raw(col).parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(col, format!("bad number `{}`", self.raw(col)))),
        }
    }

    fn opt_num(&self, col: usize) -> Result<Option<f64>, RowError> {
        if self.raw(col).is_empty() {
            Ok(None)
        } else {
            self.num(col).map(Some)
        }
    }

    fn count(&self, col: usize) -> Result<u32, RowError> {
        self.raw(col).parse::<u32>().map_err(|_| self.err(col, format!("bad non-negative integer `{}`", self.raw(col))))
    }

    fn date(&self, col: usize) -> Result<NaiveDate, RowError> {
        NaiveDate::parse_from_str(self.raw(col), "%Y-%m-%d")
            .map_err(|_| self.err(col, format!("bad date `{}`", self.raw(col))))
    }
}

/// Reads a headed CSV, requiring exactly `columns` in order, and maps each
/// data row. Every bad row is collected rather than stopping at the first.
fn read_table<R: Read, T>(
    reader: R,
    path: &Path,
    columns: &[&str],
    mut parse: impl FnMut(&Row<'_>) -> Result<T, RowError>,
) -> Result<Vec<T>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let parse_err = |errors| IngestError::Parse { path: path.to_path_buf(), errors };
    let headers: Vec<String> = match rdr.headers() {
        Ok(h) => h.iter().map(|s| s.trim().trim_start_matches('\u{feff}').to_string()).collect(),
        Err(e) => return Err(parse_err(vec![RowError { line: 1, column: None, reason: e.to_string() }])),
    };
    if headers.iter().map(String::as_str).ne(columns.iter().copied()) {
        if headers.iter().all(String::is_empty) {
            // Completely empty file: no header, no rows.
            return Ok(Vec::new());
        }
        return Err(parse_err(vec![RowError {
            line: 1,
            column: None,
            reason: format!("expected header `{}`, found `{}`", columns.join(","), headers.join(",")),
        }]));
    }
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        match rec {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != columns.len() {
                    errors.push(RowError {
                        line,
                        column: None,
                        reason: format!("expected {} fields, found {}", columns.len(), rec.len()),
                    });
                    continue;
                }
                let row = Row { rec: &rec, headers: &headers, line };
                match parse(&row) {
                    Ok(v) => out.push(v),
                    Err(e) => errors.push(e),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(RowError { line, column: None, reason: e.to_string() });
            }
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(parse_err(errors))
    }
}

fn open(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::open(path).map_err(|source| IngestError::File { path: path.to_path_buf(), source })
}

pub const SLEEP_COLUMNS: [&str; 6] = ["onset", "wake", "latency_min", "awake_min", "awakenings_gt5", "efficiency"];
pub const ACTIVITY_COLUMNS: [&str; 3] = ["start", "duration_min", "kind"];
pub const ENV_COLUMNS: [&str; 3] = ["at", "temperature_f", "humidity_pct"];
pub const MEAL_COLUMNS: [&str; 1] = ["at"];
pub const RECORD_COLUMNS: [&str; 13] = [
    "night_date",
    "onset",
    "wake",
    "latency_min",
    "awake_min",
    "awakenings_gt5",
    "efficiency",
    "exercise_day_min",
    "exercise_week_min",
    "eat_sleep_interval_min",
    "awake_between_min",
    "start_temp_f",
    "start_humidity_pct",
];

fn sleep_row(row: &Row<'_>) -> Result<SleepSession, RowError> {
    let s = SleepSession {
        onset: row.ts(0)?,
        wake: row.ts(1)?,
        latency_min: row.num(2)?,
        awake_min: row.num(3)?,
        awakenings_gt5: row.count(4)?,
        efficiency: row.num(5)?,
    };
    if let Some(v) = s.violations().into_iter().next() {
        let col = SLEEP_COLUMNS.iter().position(|c| *c == v.field).unwrap_or(1);
        return Err(row.err(col, v.rule));
    }
    Ok(s)
}

pub fn read_sleep_log<R: Read>(reader: R, path: &Path) -> Result<Vec<SleepSession>, IngestError> {
    let mut v = read_table(reader, path, &SLEEP_COLUMNS, sleep_row)?;
    v.sort_by(cmp_session);
    Ok(v)
}

/// One session per data row, sorted by onset.
pub fn parse_sleep_log(path: &Path) -> Result<Vec<SleepSession>, IngestError> {
    read_sleep_log(open(path)?, path)
}

fn activity_row(row: &Row<'_>) -> Result<ActivityEvent, RowError> {
    let a = ActivityEvent { start: row.ts(0)?, duration_min: row.num(1)?, kind: row.raw(2).to_string() };
    if a.duration_min <= 0.0 {
        return Err(row.err(1, "duration_min must be > 0"));
    }
    Ok(a)
}

pub fn read_activity_log<R: Read>(reader: R, path: &Path) -> Result<Vec<ActivityEvent>, IngestError> {
    let mut v = read_table(reader, path, &ACTIVITY_COLUMNS, activity_row)?;
    v.sort_by(cmp_activity);
    Ok(v)
}

pub fn parse_activity_log(path: &Path) -> Result<Vec<ActivityEvent>, IngestError> {
    read_activity_log(open(path)?, path)
}

fn env_row(row: &Row<'_>) -> Result<EnvSample, RowError> {
    let e = EnvSample { at: row.ts(0)?, temperature_f: row.num(1)?, humidity_pct: row.num(2)? };
    if !(0.0..=100.0).contains(&e.humidity_pct) {
        return Err(row.err(2, "humidity_pct out of [0,100]"));
    }
    Ok(e)
}

pub fn read_environment_log<R: Read>(reader: R, path: &Path) -> Result<Vec<EnvSample>, IngestError> {
    let mut v = read_table(reader, path, &ENV_COLUMNS, env_row)?;
    v.sort_by(cmp_env);
    Ok(v)
}

pub fn parse_environment_log(path: &Path) -> Result<Vec<EnvSample>, IngestError> {
    read_environment_log(open(path)?, path)
}

pub fn read_meal_log<R: Read>(reader: R, path: &Path) -> Result<Vec<MealEvent>, IngestError> {
    let mut v = read_table(reader, path, &MEAL_COLUMNS, |row| Ok(MealEvent { at: row.ts(0)? }))?;
    v.sort();
    Ok(v)
}

pub fn parse_meal_log(path: &Path) -> Result<Vec<MealEvent>, IngestError> {
    read_meal_log(open(path)?, path)
}

// Total orders over every field, so that sorting fully determines the
// order of floating-point sums.
fn cmp_session(a: &SleepSession, b: &SleepSession) -> Ordering {
    a.onset
        .cmp(&b.onset)
        .then(a.wake.cmp(&b.wake))
        .then(a.latency_min.total_cmp(&b.latency_min))
        .then(a.awake_min.total_cmp(&b.awake_min))
        .then(a.awakenings_gt5.cmp(&b.awakenings_gt5))
        .then(a.efficiency.total_cmp(&b.efficiency))
}

fn cmp_activity(a: &ActivityEvent, b: &ActivityEvent) -> Ordering {
    a.start.cmp(&b.start).then(a.duration_min.total_cmp(&b.duration_min)).then(a.kind.cmp(&b.kind))
}

fn cmp_env(a: &EnvSample, b: &EnvSample) -> Ordering {
    a.at.cmp(&b.at).then(a.temperature_f.total_cmp(&b.temperature_f)).then(a.humidity_pct.total_cmp(&b.humidity_pct))
}

fn minutes(d: Duration) -> f64 {
    d.num_seconds() as f64 / 60.0
}

fn duration_min(m: f64) -> Duration {
    Duration::milliseconds((m * 60_000.0).round() as i64)
}

/// Joins the four sources into one [`DayRecord`] per sleep session.
///
/// * exercise for the day sums activities starting in the waking period
///   `[max(previous wake, onset - 24h), onset)`;
/// * exercise for the week sums activities starting from midnight
///   `week_window_days - 1` days before the night date up to onset;
/// * the eating interval runs from the latest meal in
///   `[onset - meal_lookback_h, onset]` to onset;
/// * starting temperature and humidity come from the sample nearest onset
///   within `env_window_min` (earlier sample on ties);
/// * awake-between is set only when the previous session's night is the
///   preceding calendar date.
///
/// Inputs are re-sorted internally, so row order does not matter.
pub fn merge_day_records(
    sessions: &[SleepSession],
    activities: &[ActivityEvent],
    env: &[EnvSample],
    meals: &[MealEvent],
    policy: &MergePolicy,
) -> Result<Vec<DayRecord>, IngestError> {
    let mut sessions = sessions.to_vec();
    sessions.sort_by(cmp_session);
    let mut activities = activities.to_vec();
    activities.sort_by(cmp_activity);
    let mut env = env.to_vec();
    env.sort_by(cmp_env);
    let mut meals = meals.to_vec();
    meals.sort();

    for w in sessions.windows(2) {
        if w[1].onset < w[0].wake {
            return Err(IngestError::Overlap {
                first_onset: w[0].onset,
                first_wake: w[0].wake,
                second_onset: w[1].onset,
            });
        }
    }

    let env_window = duration_min(policy.env_window_min);
    let meal_lookback = duration_min(policy.meal_lookback_h * 60.0);
    let week_back = i64::from(policy.week_window_days.max(1)) - 1;
    let sum_between = |from: NaiveDateTime, to: NaiveDateTime| -> f64 {
        let lo = activities.partition_point(|a| a.start < from);
        let hi = activities.partition_point(|a| a.start < to);
        activities[lo..hi].iter().map(|a| a.duration_min).sum()
    };

    let mut out = Vec::with_capacity(sessions.len());
    for (i, s) in sessions.iter().enumerate() {
        let night_date = s.night_date();
        let prev = i.checked_sub(1).map(|j| &sessions[j]);
        let day_start = match prev {
            Some(p) => p.wake.max(s.onset - Duration::hours(24)),
            None => s.onset - Duration::hours(24),
        };
        let exercise_day_min = sum_between(day_start, s.onset);
        let week_start = (night_date - Duration::days(week_back)).and_hms_opt(0, 0, 0).expect("midnight exists");
        let exercise_week_min = sum_between(week_start.min(day_start), s.onset);

        let meal_end = meals.partition_point(|m| m.at <= s.onset);
        let eat_sleep_interval_min =
            meals[..meal_end].last().filter(|m| m.at >= s.onset - meal_lookback).map(|m| minutes(s.onset - m.at));

        let env_lo = env.partition_point(|e| e.at < s.onset - env_window);
        let env_hi = env.partition_point(|e| e.at <= s.onset + env_window);
        let nearest = env[env_lo..env_hi].iter().min_by_key(|e| (s.onset - e.at).num_milliseconds().abs());

        let awake_between_min =
            prev.filter(|p| p.night_date().succ_opt() == Some(night_date)).map(|p| minutes(s.onset - p.wake));

        out.push(DayRecord {
            night_date,
            sleep: s.clone(),
            exercise_day_min,
            exercise_week_min,
            eat_sleep_interval_min,
            awake_between_min,
            start_temp_f: nearest.map(|e| e.temperature_f),
            start_humidity_pct: nearest.map(|e| e.humidity_pct),
        });
    }
    Ok(out)
}

/// Keeps maximal runs of consecutive nights whose length is at least
/// `min_run`. A night missing its awake-between value starts a new run.
pub fn filter_consecutive(records: &[DayRecord], min_run: usize) -> Result<Vec<DayRecord>, IngestError> {
    if min_run < 2 {
        return Err(IngestError::MinRun(min_run));
    }
    let mut recs = records.to_vec();
    recs.sort_by_key(|r| r.night_date);
    if let Some(w) = recs.windows(2).find(|w| w[0].night_date == w[1].night_date) {
        return Err(IngestError::DuplicateDate(w[0].night_date));
    }
    let mut out = Vec::with_capacity(recs.len());
    let mut start = 0;
    for i in 1..=recs.len() {
        let continues = i < recs.len()
            && recs[i - 1].night_date.succ_opt() == Some(recs[i].night_date)
            && recs[i].awake_between_min.is_some();
        if !continues {
            if i - start >= min_run {
                out.extend_from_slice(&recs[start..i]);
            }
            start = i;
        }
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records in the fixed `dayrecords.csv` column order; absent values
/// are empty fields.
pub fn write_day_records<W: Write>(writer: W, records: &[DayRecord]) -> Result<(), IngestError> {
    let werr = |e: csv::Error| IngestError::Write(e.to_string());
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(RECORD_COLUMNS).map_err(werr)?;
    for r in records {
        w.write_record([
            r.night_date.format("%Y-%m-%d").to_string(),
            format_timestamp(r.sleep.onset),
            format_timestamp(r.sleep.wake),
            r.sleep.latency_min.to_string(),
            r.sleep.awake_min.to_string(),
            r.sleep.awakenings_gt5.to_string(),
            r.sleep.efficiency.to_string(),
            r.exercise_day_min.to_string(),
            r.exercise_week_min.to_string(),
            opt(r.eat_sleep_interval_min),
            opt(r.awake_between_min),
            opt(r.start_temp_f),
            opt(r.start_humidity_pct),
        ])
        .map_err(werr)?;
    }
    w.flush().map_err(|e| IngestError::Write(e.to_string()))
}

pub fn day_records_to_string(records: &[DayRecord]) -> String {
    let mut buf = Vec::new();
    write_day_records(&mut buf, records).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Reads `dayrecords.csv`; each row must pass [`validate_day_record`].
pub fn read_day_records<R: Read>(reader: R, path: &Path) -> Result<Vec<DayRecord>, IngestError> {
    read_table(reader, path, &RECORD_COLUMNS, |row| {
        let rec = DayRecord {
            night_date: row.date(0)?,
            sleep: SleepSession {
                onset: row.ts(1)?,
                wake: row.ts(2)?,
                latency_min: row.num(3)?,
                awake_min: row.num(4)?,
                awakenings_gt5: row.count(5)?,
                efficiency: row.num(6)?,
            },
            exercise_day_min: row.num(7)?,
            exercise_week_min: row.num(8)?,
            eat_sleep_interval_min: row.opt_num(9)?,
            awake_between_min: row.opt_num(10)?,
            start_temp_f: row.opt_num(11)?,
            start_humidity_pct: row.opt_num(12)?,
        };
        if let Some(v) = validate_day_record(&rec).into_iter().next() {
            let col = RECORD_COLUMNS.iter().position(|c| *c == v.field).unwrap_or(0);
            return Err(row.err(col, v.rule));
        }
        Ok(rec)
    })
}

pub fn load_day_records(path: &Path) -> Result<Vec<DayRecord>, IngestError> {
    read_day_records(open(path)?, path)
}
