//! Domain types shared across the pipeline.
//!
//! A [`DayRecord`] is one night of sleep plus the lifestyle measurements of
//! the waking period that led up to it. After discretization each usable
//! night becomes a [`FeatureRow`] carrying the ten categorical input events
//! and the four continuous sleep-quality outputs.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::UnknownName;

/// One scored sleep session.
#[derive(Debug, Clone, PartialEq)]
pub struct SleepSession {
    pub onset: NaiveDateTime,
    pub wake: NaiveDateTime,
    pub latency_min: f64,
    pub awake_min: f64,
    pub awakenings_gt5: u32,
    pub efficiency: f64,
}

impl SleepSession {
    /// Minutes between onset and wake.
    pub fn in_bed_min(&self) -> f64 {
        (self.wake - self.onset).num_seconds() as f64 / 60.0
    }

    pub fn night_date(&self) -> NaiveDate {
        self.onset.date()
    }

    pub fn output(&self, measure: OutputMeasure) -> f64 {
        match measure {
            OutputMeasure::AwakeMin => self.awake_min,
            OutputMeasure::AwakeningsGt5 => f64::from(self.awakenings_gt5),
            OutputMeasure::Efficiency => self.efficiency,
            OutputMeasure::LatencyMin => self.latency_min,
        }
    }

    /// Invariant violations of this session alone.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.wake <= self.onset {
            out.push(Violation::new("wake", "wake not after onset"));
        }
        if !(self.latency_min >= 0.0) || !self.latency_min.is_finite() {
            out.push(Violation::new("latency_min", "latency_min must be finite and >= 0"));
        }
        if !(self.awake_min >= 0.0) || !self.awake_min.is_finite() {
            out.push(Violation::new("awake_min", "awake_min must be finite and >= 0"));
        } else if self.wake > self.onset && self.awake_min > self.in_bed_min() {
            out.push(Violation::new("awake_min", "awake_min exceeds minutes in bed"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            out.push(Violation::new("efficiency", "efficiency out of [0,1]"));
        }
        out
    }
}

/// A logged exercise activity.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityEvent {
    pub start: NaiveDateTime,
    pub duration_min: f64,
    pub kind: String,
}

/// An environment sensor reading.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSample {
    pub at: NaiveDateTime,
    pub temperature_f: f64,
    pub humidity_pct: f64,
}

/// A meal timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MealEvent {
    pub at: NaiveDateTime,
}

/// One night of sleep and the waking period preceding it.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    /// Calendar date of sleep onset.
    pub night_date: NaiveDate,
    pub sleep: SleepSession,
    pub exercise_day_min: f64,
    /// Rolling 7-day sum including the current day.
    pub exercise_week_min: f64,
    pub eat_sleep_interval_min: Option<f64>,
    /// Previous session's wake to this session's onset; only when the
    /// previous calendar night exists.
    pub awake_between_min: Option<f64>,
    pub start_temp_f: Option<f64>,
    pub start_humidity_pct: Option<f64>,
}

/// A single broken invariant: which field, and which rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl Violation {
    pub fn new(field: &'static str, rule: impl Into<String>) -> Self {
        Self { field, rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rule)
    }
}

fn check_nonneg(out: &mut Vec<Violation>, field: &'static str, v: f64) {
    if !(v >= 0.0) || !v.is_finite() {
        out.push(Violation::new(field, format!("{field} must be finite and >= 0")));
    }
}

/// Checks every per-record invariant of a [`DayRecord`].
///
/// Returns an empty list iff the record is well-formed. The
/// "awake-between present iff a previous night exists" rule spans records
/// and is checked by [`validate_day_records`].
pub fn validate_day_record(rec: &DayRecord) -> Vec<Violation> {
    let mut out = rec.sleep.violations();
    if rec.night_date != rec.sleep.onset.date() {
        out.push(Violation::new("night_date", "night_date differs from date of sleep onset"));
    }
    check_nonneg(&mut out, "exercise_day_min", rec.exercise_day_min);
    check_nonneg(&mut out, "exercise_week_min", rec.exercise_week_min);
    if rec.exercise_week_min < rec.exercise_day_min {
        out.push(Violation::new("exercise_week_min", "weekly < daily"));
    }
    if let Some(v) = rec.eat_sleep_interval_min {
        check_nonneg(&mut out, "eat_sleep_interval_min", v);
    }
    if let Some(v) = rec.awake_between_min {
        check_nonneg(&mut out, "awake_between_min", v);
    }
    if let Some(t) = rec.start_temp_f {
        // The temperature scheme's domain starts at 0 F.
        if !(t >= 0.0) || !t.is_finite() {
            out.push(Violation::new("start_temp_f", "start_temp_f outside [0, inf)"));
        }
    }
    if let Some(h) = rec.start_humidity_pct {
        if !(0.0..=100.0).contains(&h) {
            out.push(Violation::new("start_humidity_pct", "start_humidity_pct out of [0,100]"));
        }
    }
    out
}

/// Per-record validation plus the cross-record awake-between rule, for a
/// date-sorted slice. Returned pairs are (index, violation).
pub fn validate_day_records(recs: &[DayRecord]) -> Vec<(usize, Violation)> {
    let mut out = Vec::new();
    for (i, rec) in recs.iter().enumerate() {
        out.extend(validate_day_record(rec).into_iter().map(|v| (i, v)));
        let has_prev = i > 0 && recs[i - 1].night_date.succ_opt() == Some(rec.night_date);
        match (has_prev, rec.awake_between_min.is_some()) {
            (false, true) => {
                out.push((i, Violation::new("awake_between_min", "awake_between_min present without a previous night")))
            }
            (true, false) => {
                out.push((i, Violation::new("awake_between_min", "awake_between_min absent after a previous night")))
            }
            _ => {}
        }
    }
    out
}

macro_rules! name_enum {
    ($(#[$meta:meta])* $ty:ident { $($var:ident => $name:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $ty { $($var),+ }

        impl $ty {
            /// Every variant, sorted by name.
            pub const ALL: &'static [$ty] = &[$($ty::$var),+];

            pub fn name(self) -> &'static str {
                match self { $($ty::$var => $name),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = UnknownName;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($ty::$var),)+
                    _ => Err(UnknownName(s.to_string())),
                }
            }
        }
    };
}

name_enum! {
    /// The ten input / confounding events. Declaration order is name order.
    InputEvent {
        AwakeBetween => "awake_between",
        EatSleepInterval => "eat_sleep_interval",
        ExerciseDay => "exercise_day",
        ExerciseWeek => "exercise_week",
        PrevAwakeMin => "prev_awake_min",
        PrevAwakenings => "prev_awakenings",
        PrevEfficiency => "prev_efficiency",
        PrevLatency => "prev_latency",
        StartHumidity => "start_humidity",
        StartTemp => "start_temp",
    }
}

name_enum! {
    /// The four sleep-quality outputs. Declaration order is name order.
    OutputMeasure {
        AwakeMin => "awake_min",
        AwakeningsGt5 => "awakenings_gt5",
        Efficiency => "efficiency",
        LatencyMin => "latency_min",
    }
}

impl InputEvent {
    /// For the previous-night events, the measure they lag.
    pub fn lagged_measure(self) -> Option<OutputMeasure> {
        match self {
            InputEvent::PrevAwakeMin => Some(OutputMeasure::AwakeMin),
            InputEvent::PrevAwakenings => Some(OutputMeasure::AwakeningsGt5),
            InputEvent::PrevEfficiency => Some(OutputMeasure::Efficiency),
            InputEvent::PrevLatency => Some(OutputMeasure::LatencyMin),
            _ => None,
        }
    }

    /// The lifestyle (non-lagged) value this event categorizes, if any.
    pub fn lifestyle_value(self, rec: &DayRecord) -> Option<f64> {
        match self {
            InputEvent::AwakeBetween => rec.awake_between_min,
            InputEvent::EatSleepInterval => rec.eat_sleep_interval_min,
            InputEvent::ExerciseDay => Some(rec.exercise_day_min),
            InputEvent::ExerciseWeek => Some(rec.exercise_week_min),
            InputEvent::StartHumidity => rec.start_humidity_pct,
            InputEvent::StartTemp => rec.start_temp_f,
            _ => None,
        }
    }
}

/// A category label drawn from a scheme.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Category(String);

impl Category {
    /// Panics on an empty label; schemes validate labels before building one.
    pub fn new(label: impl Into<String>) -> Self {
        let label = label.into();
        assert!(!label.is_empty(), "category label must be nonempty");
        Category(label)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Category {
    fn from(s: &str) -> Self {
        Category::new(s)
    }
}

impl PartialEq<&str> for Category {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

impl PartialEq<str> for Category {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

/// The discretized view of one night that has a preceding night.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub night_date: NaiveDate,
    /// Indexed by [`InputEvent::index`]; `None` marks an unavailable input.
    pub inputs: [Option<Category>; 10],
    /// Indexed by [`OutputMeasure::index`].
    pub outputs: [f64; 4],
    pub output_categories: [Category; 4],
}

impl FeatureRow {
    pub fn input(&self, ev: InputEvent) -> Option<&Category> {
        self.inputs[ev.index()].as_ref()
    }

    pub fn output(&self, m: OutputMeasure) -> f64 {
        self.outputs[m.index()]
    }

    pub fn output_category(&self, m: OutputMeasure) -> &Category {
        &self.output_categories[m.index()]
    }
}

/// `input --[confounder]--> output`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleTuple {
    pub input_event: InputEvent,
    pub output_measure: OutputMeasure,
    pub confounder: InputEvent,
}

impl RuleTuple {
    /// `None` when the confounder is the input itself.
    pub fn new(input_event: InputEvent, output_measure: OutputMeasure, confounder: InputEvent) -> Option<Self> {
        (input_event != confounder).then_some(Self { input_event, output_measure, confounder })
    }
}

impl fmt::Display for RuleTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -[{}]-> {}", self.input_event, self.confounder, self.output_measure)
    }
}
