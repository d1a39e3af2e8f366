//! Synthetic N-of-1 datasets with planted effects.
//!
//! Every day gets lifestyle categories drawn from per-event marginals and a
//! value drawn inside the chosen bin. Each sleep output is
//!
//! ```text
//! baseline + planted deltas + confounder deltas + noise,
//! noise_t = carryover * noise_{t-1} + N(0, sd)
//! ```
//!
//! clamped to the output's domain. Previous-night inputs are whatever the
//! previous day's outputs categorize to, so deltas keyed on them act as
//! lagged effects. Sleep timestamps are nominal (onset near 23:00); the
//! awake-between value is sampled like any other lifestyle field.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::discretize::{categorize, default_schemes, Bin, SchemeId, SchemeSet, MISSING_LABEL};
use crate::model::{Category, DayRecord, InputEvent, OutputMeasure, SleepSession};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("{0}")]
    Invalid(String),
    #[error("reading generator spec {path}: {reason}")]
    Config { path: String, reason: String },
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Invalid(msg.into())
}

/// Adds `delta` to `output` on days where `event` is `category`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDelta {
    pub event: InputEvent,
    pub category: Category,
    pub output: OutputMeasure,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_days: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Indexed by [`OutputMeasure::index`].
    pub baseline_means: [f64; 4],
    pub noise_sd: [f64; 4],
    pub planted_effects: Vec<PlantedDelta>,
    pub confounder_links: Vec<PlantedDelta>,
    /// AR(1) coefficient on the previous night's noise.
    pub carryover: f64,
    /// Category probabilities for the lifestyle inputs, in scheme order.
    /// Events not listed are uniform over their categories.
    pub input_marginals: BTreeMap<InputEvent, Vec<f64>>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        let mut means = [0.0; 4];
        let mut sds = [0.0; 4];
        for (m, mean, sd) in [
            (OutputMeasure::AwakeMin, 18.0, 6.0),
            (OutputMeasure::AwakeningsGt5, 2.0, 1.0),
            (OutputMeasure::Efficiency, 0.88, 0.03),
            (OutputMeasure::LatencyMin, 14.0, 5.0),
        ] {
            means[m.index()] = mean;
            sds[m.index()] = sd;
        }
        Self {
            n_days: 365,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            baseline_means: means,
            noise_sd: sds,
            planted_effects: Vec::new(),
            confounder_links: Vec::new(),
            carryover: 0.0,
            input_marginals: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n_days: Option<usize>,
    seed: Option<u64>,
    start_date: Option<String>,
    carryover: Option<f64>,
    #[serde(default)]
    planted_effects: Vec<(String, String, String, f64)>,
    #[serde(default)]
    confounder_links: Vec<(String, String, String, f64)>,
    #[serde(default)]
    baseline_means: BTreeMap<String, f64>,
    #[serde(default)]
    noise_sd: BTreeMap<String, f64>,
    #[serde(default)]
    input_marginals: BTreeMap<String, BTreeMap<String, f64>>,
}

impl GeneratorSpec {
    /// Reads a spec; anything omitted keeps its [`Default`] value.
    ///
    /// ```toml
    /// n_days = 365
    /// seed = 7
    /// carryover = 0.2
    /// planted_effects = [["start_temp", "Warm", "awake_min", 12.0]]
    /// confounder_links = [["start_humidity", "High", "awake_min", 12.0]]
    ///
    /// [baseline_means]
    /// awake_min = 18.0
    ///
    /// [noise_sd]
    /// awake_min = 6.0
    ///
    /// [input_marginals.start_temp]
    /// Cold = 0.25
    /// Comfortable = 0.5
    /// Warm = 0.25
    /// ```
    pub fn from_config_str(text: &str, schemes: &SchemeSet) -> Result<Self, SpecError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let mut spec = GeneratorSpec::default();
        if let Some(n) = raw.n_days {
            spec.n_days = n;
        }
        if let Some(s) = raw.seed {
            spec.seed = s;
        }
        if let Some(d) = raw.start_date {
            spec.start_date =
                NaiveDate::parse_from_str(&d, "%Y-%m-%d").map_err(|_| invalid(format!("bad start_date `{d}`")))?;
        }
        if let Some(c) = raw.carryover {
            spec.carryover = c;
        }
        let measure = |s: &str| s.parse::<OutputMeasure>().map_err(|e| invalid(e.to_string()));
        for (name, v) in raw.baseline_means {
            spec.baseline_means[measure(&name)?.index()] = v;
        }
        for (name, v) in raw.noise_sd {
            spec.noise_sd[measure(&name)?.index()] = v;
        }
        let delta = |(ev, cat, out, d): (String, String, String, f64)| -> Result<PlantedDelta, SpecError> {
            let event = ev.parse::<InputEvent>().map_err(|e| invalid(e.to_string()))?;
            if !schemes.for_input(event).has_category(&cat) {
                return Err(invalid(format!("`{cat}` is not a category of {event}")));
            }
            Ok(PlantedDelta { event, category: Category::new(cat), output: measure(&out)?, delta: d })
        };
        spec.planted_effects = raw.planted_effects.into_iter().map(delta).collect::<Result<_, _>>()?;
        spec.confounder_links = raw.confounder_links.into_iter().map(delta).collect::<Result<_, _>>()?;
        for (name, probs) in raw.input_marginals {
            let event = name.parse::<InputEvent>().map_err(|e| invalid(e.to_string()))?;
            let cats = schemes.for_input(event).categories();
            if let Some(bad) = probs.keys().find(|k| !cats.iter().any(|c| c.as_str() == k.as_str())) {
                return Err(invalid(format!("`{bad}` is not a category of {event}")));
            }
            let ordered = cats.iter().map(|c| probs.get(c.as_str()).copied().unwrap_or(0.0)).collect();
            spec.input_marginals.insert(event, ordered);
        }
        spec.validate(schemes)?;
        Ok(spec)
    }

    pub fn from_config_file(path: &Path, schemes: &SchemeSet) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SpecError::Config { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_config_str(&text, schemes)
    }

    pub fn validate(&self, schemes: &SchemeSet) -> Result<(), SpecError> {
        if self.n_days < 2 {
            return Err(invalid(format!("n_days must be >= 2, got {}", self.n_days)));
        }
        if !(0.0..1.0).contains(&self.carryover) {
            return Err(invalid(format!("carryover must be in [0,1), got {}", self.carryover)));
        }
        for &m in OutputMeasure::ALL {
            if !(self.noise_sd[m.index()] > 0.0) || !self.noise_sd[m.index()].is_finite() {
                return Err(invalid(format!("noise_sd for {m} must be > 0")));
            }
            if !self.baseline_means[m.index()].is_finite() {
                return Err(invalid(format!("baseline mean for {m} must be finite")));
            }
        }
        for d in self.planted_effects.iter().chain(&self.confounder_links) {
            if !schemes.for_input(d.event).has_category(d.category.as_str()) {
                return Err(invalid(format!("`{}` is not a category of {}", d.category, d.event)));
            }
            if !d.delta.is_finite() {
                return Err(invalid(format!("delta for {} must be finite", d.event)));
            }
        }
        for (ev, probs) in &self.input_marginals {
            if ev.lagged_measure().is_some() {
                return Err(invalid(format!("{ev} follows the previous night's outputs and has no marginal")));
            }
            let n = schemes.for_input(*ev).categories().len();
            if probs.len() != n {
                return Err(invalid(format!("{ev} needs {n} probabilities, got {}", probs.len())));
            }
            if probs.iter().any(|p| !(*p >= 0.0)) {
                return Err(invalid(format!("{ev} has a negative probability")));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("{ev} probabilities sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    fn marginal(&self, ev: InputEvent, n_cats: usize) -> Vec<f64> {
        self.input_marginals.get(&ev).cloned().unwrap_or_else(|| vec![1.0 / n_cats as f64; n_cats])
    }
}

/// How often each output had to be clamped into its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClampReport {
    pub n_days: usize,
    /// Indexed by [`OutputMeasure::index`].
    pub clamped: [usize; 4],
}

impl ClampReport {
    pub fn rate(&self, m: OutputMeasure) -> f64 {
        if self.n_days == 0 {
            0.0
        } else {
            self.clamped[m.index()] as f64 / self.n_days as f64
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Vec<DayRecord>, SpecError> {
    generate_with(spec, &default_schemes()).map(|(r, _)| r)
}

/// The lifestyle events sampled directly, in fixed draw order.
const LIFESTYLE: [InputEvent; 6] = [
    InputEvent::AwakeBetween,
    InputEvent::EatSleepInterval,
    InputEvent::ExerciseDay,
    InputEvent::ExerciseWeek,
    InputEvent::StartHumidity,
    InputEvent::StartTemp,
];

fn pick(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// A value inside `bin`, at or above `floor`: uniform on finite bins, a
/// shifted exponential on half-infinite ones.
fn sample_in_bin(rng: &mut ChaCha8Rng, bin: &Bin, floor: f64) -> f64 {
    let lo = bin.lower.max(floor);
    for _ in 0..1000 {
        let v = match (lo.is_finite(), bin.upper.is_finite()) {
            (true, true) => lo + rng.random::<f64>() * (bin.upper - lo),
            (true, false) => {
                let scale = (lo.abs() * 0.2).max(1.0);
                lo + Exp::new(1.0 / scale).expect("positive rate").sample(rng)
            }
            (false, true) => {
                let scale = (bin.upper.abs() * 0.2).max(1.0);
                bin.upper - Exp::new(1.0 / scale).expect("positive rate").sample(rng)
            }
            (false, false) => Normal::new(0.0, 100.0).expect("valid normal").sample(rng),
        };
        if bin.contains(v) && v >= floor {
            return v;
        }
    }
    // Degenerate bin (e.g. a single closed point); fall back to its lower end.
    if bin.contains(lo) {
        lo
    } else {
        bin.upper
    }
}

/// Categories are either a scheme special (exact value) or a bin.
enum Slot<'a> {
    Exact(f64),
    Range(&'a Bin),
}

fn slots(scheme: &crate::discretize::Scheme) -> Vec<Slot<'_>> {
    scheme.special.iter().map(|(v, _)| Slot::Exact(*v)).chain(scheme.bins.iter().map(Slot::Range)).collect()
}

fn slot_reaches(slot: &Slot<'_>, floor: f64) -> bool {
    match slot {
        Slot::Exact(v) => *v >= floor,
        Slot::Range(b) => b.upper > floor || (b.upper == floor && b.upper_closed),
    }
}

fn sample_slot(rng: &mut ChaCha8Rng, slot: &Slot<'_>, floor: f64) -> f64 {
    match slot {
        Slot::Exact(v) => *v,
        Slot::Range(b) => sample_in_bin(rng, b, floor),
    }
}

fn clamp_output(m: OutputMeasure, v: f64) -> (f64, bool) {
    let c = match m {
        OutputMeasure::Efficiency => v.clamp(0.0, 1.0),
        OutputMeasure::AwakeningsGt5 => v.round().max(0.0),
        _ => v.max(0.0),
    };
    let clamped = match m {
        OutputMeasure::AwakeningsGt5 => v.round() < 0.0,
        _ => c != v,
    };
    (c, clamped)
}

/// Generates `spec.n_days` consecutive nights, reproducible from the seed.
pub fn generate_with(spec: &GeneratorSpec, schemes: &SchemeSet) -> Result<(Vec<DayRecord>, ClampReport), SpecError> {
    spec.validate(schemes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<Normal<f64>> =
        OutputMeasure::ALL.iter().map(|m| Normal::new(0.0, spec.noise_sd[m.index()]).expect("sd validated")).collect();
    let cats: BTreeMap<InputEvent, Vec<Category>> =
        InputEvent::ALL.iter().map(|&e| (e, schemes.for_input(e).categories())).collect();

    let mut records = Vec::with_capacity(spec.n_days);
    let mut report = ClampReport { n_days: spec.n_days, ..Default::default() };
    let mut prev_noise = [0.0; 4];
    let mut prev_out_cats: Option<[Category; 4]> = None;

    for day in 0..spec.n_days {
        let date = spec.start_date + Duration::days(day as i64);
        let mut chosen: BTreeMap<InputEvent, Category> = BTreeMap::new();
        let mut values: BTreeMap<InputEvent, Option<f64>> = BTreeMap::new();

        for ev in LIFESTYLE {
            let scheme = schemes.get(SchemeId::Lifestyle(ev));
            let slots = slots(scheme);
            let labels = &cats[&ev];
            let mut probs = spec.marginal(ev, labels.len());
            // Weekly exercise can never be below the day's own minutes.
            let floor = if ev == InputEvent::ExerciseWeek {
                values.get(&InputEvent::ExerciseDay).copied().flatten().unwrap_or(0.0)
            } else {
                f64::NEG_INFINITY
            };
            for (p, s) in probs.iter_mut().zip(&slots) {
                if !slot_reaches(s, floor) {
                    *p = 0.0;
                }
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            let k = pick(&mut rng, &probs);
            let v = sample_slot(&mut rng, &slots[k], floor);
            let label = labels[k].clone();
            let value = (label.as_str() != MISSING_LABEL).then_some(v);
            chosen.insert(ev, label);
            values.insert(ev, value);
        }
        if day == 0 {
            // The first night has no previous wake.
            values.insert(InputEvent::AwakeBetween, None);
        }
        if let Some(prev) = &prev_out_cats {
            for &ev in InputEvent::ALL {
                if let Some(m) = ev.lagged_measure() {
                    chosen.insert(ev, prev[m.index()].clone());
                }
            }
        }

        let mut outputs = [0.0; 4];
        let mut out_cats: Vec<Category> = Vec::with_capacity(4);
        for &m in OutputMeasure::ALL {
            let i = m.index();
            let shift: f64 = spec
                .planted_effects
                .iter()
                .chain(&spec.confounder_links)
                .filter(|d| d.output == m && chosen.get(&d.event) == Some(&d.category))
                .map(|d| d.delta)
                .sum();
            let e = spec.carryover * prev_noise[i] + noise[i].sample(&mut rng);
            prev_noise[i] = e;
            let (v, clamped) = clamp_output(m, spec.baseline_means[i] + shift + e);
            if clamped {
                report.clamped[i] += 1;
            }
            outputs[i] = v;
            out_cats.push(categorize(v, schemes.for_output(m)).map_err(|e| invalid(e.to_string()))?);
        }
        prev_out_cats = Some(out_cats.try_into().expect("four outputs"));

        let latency = outputs[OutputMeasure::LatencyMin.index()];
        let awake = outputs[OutputMeasure::AwakeMin.index()];
        let onset = date.and_hms_opt(23, 0, 0).expect("valid time") + Duration::minutes(rng.random_range(-60..60));
        let in_bed = (480 + rng.random_range(-60i64..=60)).max((latency + awake).ceil() as i64 + 30);
        records.push(DayRecord {
            night_date: date,
            sleep: SleepSession {
                onset,
                wake: onset + Duration::minutes(in_bed),
                latency_min: latency,
                awake_min: awake,
                awakenings_gt5: outputs[OutputMeasure::AwakeningsGt5.index()] as u32,
                efficiency: outputs[OutputMeasure::Efficiency.index()],
            },
            exercise_day_min: values[&InputEvent::ExerciseDay].unwrap_or(0.0),
            exercise_week_min: values[&InputEvent::ExerciseWeek].unwrap_or(0.0),
            eat_sleep_interval_min: values[&InputEvent::EatSleepInterval],
            awake_between_min: values[&InputEvent::AwakeBetween],
            start_temp_f: values[&InputEvent::StartTemp],
            start_humidity_pct: values[&InputEvent::StartHumidity],
        });
    }
    Ok((records, report))
}
