//! Threshold schemes and per-night feature derivation.
//!
//! Each continuous measure is mapped to a category by a [`Scheme`]: an ordered
//! list of labeled intervals plus optional exact-value specials. The first
//! category of a scheme (specials first, then bins, in listed order) is the
//! base category for average-effect estimation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::model::{Category, DayRecord, FeatureRow, InputEvent, OutputMeasure};

/// Label a missing value maps to, when its scheme defines it.
pub const MISSING_LABEL: &str = "Missing";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizeError {
    #[error("value {value} is outside every bin of scheme `{scheme}`")]
    Domain { scheme: &'static str, value: f64 },
    #[error("invalid scheme `{scheme}`: {reason}")]
    InvalidScheme { scheme: String, reason: String },
    #[error("reading scheme config {path}: {reason}")]
    Config { path: String, reason: String },
}

/// Which measure a scheme discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Output(OutputMeasure),
    /// One of the six non-lagged input events.
    Lifestyle(InputEvent),
}

impl SchemeId {
    /// All ten schemes: the four outputs, then the six lifestyle inputs.
    pub fn all() -> Vec<SchemeId> {
        OutputMeasure::ALL
            .iter()
            .map(|&m| SchemeId::Output(m))
            .chain(InputEvent::ALL.iter().filter(|e| e.lagged_measure().is_none()).map(|&e| SchemeId::Lifestyle(e)))
            .collect()
    }

    pub fn for_input(ev: InputEvent) -> SchemeId {
        match ev.lagged_measure() {
            Some(m) => SchemeId::Output(m),
            None => SchemeId::Lifestyle(ev),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Output(m) => m.name(),
            SchemeId::Lifestyle(e) => e.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<SchemeId> {
        SchemeId::all().into_iter().find(|s| s.name() == name)
    }

    /// The closed range of values a scheme must cover.
    pub fn domain(self) -> (f64, f64) {
        match self {
            SchemeId::Output(OutputMeasure::Efficiency) => (0.0, 1.0),
            SchemeId::Lifestyle(InputEvent::StartHumidity) => (0.0, 100.0),
            _ => (0.0, f64::INFINITY),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A labeled interval; infinite endpoints are always open.
#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
    pub label: Category,
}

impl Bin {
    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lower_closed { v >= self.lower } else { v > self.lower };
        let below = if self.upper_closed { v <= self.upper } else { v < self.upper };
        above && below
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lower_closed { '[' } else { '(' };
        let r = if self.upper_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", fmt_bound(self.lower), fmt_bound(self.upper))
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    pub id: SchemeId,
    pub bins: Vec<Bin>,
    /// Exact values with their own label, checked before the bins.
    pub special: Vec<(f64, Category)>,
}

fn bin(lower: f64, upper: f64, lc: bool, uc: bool, label: &str) -> Bin {
    Bin { lower, upper, lower_closed: lc, upper_closed: uc, label: Category::new(label) }
}

const INF: f64 = f64::INFINITY;

impl Scheme {
    /// Builds a scheme and checks its invariants.
    pub fn new(id: SchemeId, bins: Vec<Bin>, special: Vec<(f64, Category)>) -> Result<Self, DiscretizeError> {
        let s = Scheme { id, bins, special };
        s.check()?;
        Ok(s)
    }

    pub fn name(&self) -> &'static str {
        self.id.name()
    }

    /// Category order: specials, then bins, as listed.
    pub fn categories(&self) -> Vec<Category> {
        self.special.iter().map(|(_, l)| l.clone()).chain(self.bins.iter().map(|b| b.label.clone())).collect()
    }

    pub fn base_category(&self) -> Category {
        self.categories().into_iter().next().expect("scheme has at least one category")
    }

    pub fn has_category(&self, label: &str) -> bool {
        self.special.iter().any(|(_, l)| l.as_str() == label) || self.bins.iter().any(|b| b.label.as_str() == label)
    }

    fn matches(&self, v: f64) -> usize {
        self.special.iter().filter(|(x, _)| *x == v).count() + self.bins.iter().filter(|b| b.contains(v)).count()
    }

    /// Labels unique, no value in two places, and the documented domain
    /// covered exactly once.
    ///
    /// Membership is constant on each open interval between consecutive
    /// endpoints, so testing every endpoint and one interior point per gap is
    /// exhaustive.
    fn check(&self) -> Result<(), DiscretizeError> {
        let invalid = |reason: String| DiscretizeError::InvalidScheme { scheme: self.name().into(), reason };
        let cats = self.categories();
        if cats.is_empty() {
            return Err(invalid("no categories".into()));
        }
        for (i, c) in cats.iter().enumerate() {
            if cats[..i].contains(c) {
                return Err(invalid(format!("duplicate label `{c}`")));
            }
        }
        for b in &self.bins {
            if b.lower.is_nan() || b.upper.is_nan() || !(b.lower <= b.upper) {
                return Err(invalid(format!("bad bounds {b}")));
            }
            if (b.lower.is_infinite() && b.lower_closed) || (b.upper.is_infinite() && b.upper_closed) {
                return Err(invalid(format!("infinite bound cannot be closed in {b}")));
            }
        }
        if self.special.iter().any(|(v, _)| !v.is_finite()) {
            return Err(invalid("special values must be finite".into()));
        }

        let (lo, hi) = self.id.domain();
        let mut points: Vec<f64> = self
            .bins
            .iter()
            .flat_map(|b| [b.lower, b.upper])
            .chain(self.special.iter().map(|(v, _)| *v))
            .chain([lo, hi])
            .filter(|v| v.is_finite())
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();

        let mut probes: Vec<f64> = Vec::with_capacity(points.len() * 2 + 2);
        probes.push(points[0] - 1.0);
        for w in points.windows(2) {
            probes.push(w[0]);
            probes.push(w[0] + (w[1] - w[0]) / 2.0);
        }
        probes.push(*points.last().unwrap());
        probes.push(points.last().unwrap() + 1.0);

        for v in probes {
            let n = self.matches(v);
            if n > 1 {
                return Err(invalid(format!("value {v} falls in {n} categories")));
            }
            if n == 0 && v >= lo && v <= hi {
                return Err(invalid(format!("value {v} inside domain [{lo}, {hi}] is not covered")));
            }
        }
        Ok(())
    }

    /// Parses the bracket notation of one bin config entry.
    fn bin_from_config(entry: &toml::Value) -> Result<Bin, String> {
        let arr = entry.as_array().ok_or("bin entry must be an array")?;
        if arr.len() != 5 {
            return Err(format!("bin entry needs 5 elements, got {}", arr.len()));
        }
        let num = |v: &toml::Value| -> Result<f64, String> {
            v.as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| format!("expected a number, got {v}"))
        };
        let flag = |v: &toml::Value, closed: &str, open: &str| -> Result<bool, String> {
            match v.as_str() {
                Some(s) if s == closed => Ok(true),
                Some(s) if s == open => Ok(false),
                _ => Err(format!("expected \"{closed}\" or \"{open}\", got {v}")),
            }
        };
        let label = arr[4].as_str().filter(|s| !s.is_empty()).ok_or("label must be a nonempty string")?;
        Ok(Bin {
            lower: num(&arr[0])?,
            upper: num(&arr[1])?,
            lower_closed: flag(&arr[2], "lc", "lo")?,
            upper_closed: flag(&arr[3], "rc", "ro")?,
            label: Category::new(label),
        })
    }
}

/// Maps `value` to the unique category of `scheme` containing it.
pub fn categorize(value: f64, scheme: &Scheme) -> Result<Category, DiscretizeError> {
    if let Some((_, label)) = scheme.special.iter().find(|(x, _)| *x == value) {
        return Ok(label.clone());
    }
    scheme
        .bins
        .iter()
        .find(|b| b.contains(value))
        .map(|b| b.label.clone())
        .ok_or(DiscretizeError::Domain { scheme: scheme.name(), value })
}

/// The full set of ten schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSet {
    schemes: BTreeMap<SchemeId, Scheme>,
}

impl SchemeSet {
    pub fn get(&self, id: SchemeId) -> &Scheme {
        &self.schemes[&id]
    }

    pub fn for_input(&self, ev: InputEvent) -> &Scheme {
        self.get(SchemeId::for_input(ev))
    }

    pub fn for_output(&self, m: OutputMeasure) -> &Scheme {
        self.get(SchemeId::Output(m))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Scheme> {
        self.schemes.values()
    }

    pub fn len(&self) -> usize {
        self.schemes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
    }

    /// Replaces one scheme.
    pub fn with(mut self, scheme: Scheme) -> Self {
        self.schemes.insert(scheme.id, scheme);
        self
    }

    /// Overrides defaults from a config string:
    ///
    /// ```toml
    /// [scheme.latency_min]
    /// bins = [[0, 10, "lc", "rc", "Good"], [10, inf, "lo", "ro", "Poor"]]
    /// special = [[0, "Zero"]]
    /// ```
    ///
    /// Schemes not mentioned keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self, DiscretizeError> {
        let cfg_err = |reason: String| DiscretizeError::Config { path: "<config>".into(), reason };
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| cfg_err(e.to_string()))?;
        let mut set = default_schemes();
        let Some(section) = doc.get("scheme") else {
            return Ok(set);
        };
        let section = section.as_table().ok_or_else(|| cfg_err("`scheme` must be a table".into()))?;
        for (name, body) in section {
            let id = SchemeId::from_name(name).ok_or_else(|| cfg_err(format!("unknown scheme `{name}`")))?;
            let invalid = |reason: String| DiscretizeError::InvalidScheme { scheme: name.clone(), reason };
            let body = body.as_table().ok_or_else(|| invalid("must be a table".into()))?;
            for key in body.keys() {
                if key != "bins" && key != "special" {
                    return Err(invalid(format!("unexpected key `{key}`")));
                }
            }
            let bins = match body.get("bins") {
                Some(v) => v
                    .as_array()
                    .ok_or_else(|| invalid("`bins` must be an array".into()))?
                    .iter()
                    .map(Scheme::bin_from_config)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(invalid)?,
                None => Vec::new(),
            };
            let special = match body.get("special") {
                Some(v) => v
                    .as_array()
                    .ok_or_else(|| invalid("`special` must be an array".into()))?
                    .iter()
                    .map(|e| -> Result<(f64, Category), String> {
                        let pair =
                            e.as_array().filter(|a| a.len() == 2).ok_or("special entry must be [value, label]")?;
                        let v = pair[0]
                            .as_float()
                            .or_else(|| pair[0].as_integer().map(|i| i as f64))
                            .ok_or("special value must be a number")?;
                        let l = pair[1].as_str().filter(|s| !s.is_empty()).ok_or("label must be a nonempty string")?;
                        Ok((v, Category::new(l)))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(invalid)?,
                None => Vec::new(),
            };
            set = set.with(Scheme::new(id, bins, special)?);
        }
        Ok(set)
    }

    pub fn from_config_file(path: &Path) -> Result<Self, DiscretizeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DiscretizeError::Config { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_config_str(&text).map_err(|e| match e {
            DiscretizeError::Config { reason, .. } => {
                DiscretizeError::Config { path: path.display().to_string(), reason }
            }
            other => other,
        })
    }

    /// Category for a possibly-absent value: absent maps to the scheme's
    /// `Missing` category when it has one, otherwise to unavailable (`None`).
    pub fn categorize_opt(&self, id: SchemeId, value: Option<f64>) -> Result<Option<Category>, DiscretizeError> {
        let scheme = self.get(id);
        match value {
            Some(v) => categorize(v, scheme).map(Some),
            None => Ok(scheme.has_category(MISSING_LABEL).then(|| Category::new(MISSING_LABEL))),
        }
    }
}

/// Sleep-quality and lifestyle thresholds.
pub fn default_schemes() -> SchemeSet {
    use InputEvent as E;
    use OutputMeasure as M;
    let zero = |label: &str| vec![(0.0, Category::new(label))];
    #[allow(clippy::type_complexity)]
    let defs: Vec<(SchemeId, Vec<Bin>, Vec<(f64, Category)>)> = vec![
        (
            SchemeId::Output(M::LatencyMin),
            vec![
                bin(0.0, 15.0, true, true, "Good"),
                bin(15.0, 30.0, false, true, "Average"),
                bin(30.0, INF, false, false, "Poor"),
            ],
            vec![],
        ),
        (
            SchemeId::Output(M::AwakeMin),
            vec![bin(0.0, 20.0, true, true, "Good"), bin(20.0, INF, false, false, "Poor")],
            vec![],
        ),
        (
            SchemeId::Output(M::AwakeningsGt5),
            vec![bin(0.0, 1.0, true, true, "Good"), bin(1.0, INF, false, false, "Poor")],
            vec![],
        ),
        (
            SchemeId::Output(M::Efficiency),
            vec![bin(0.85, 1.0, true, true, "Good"), bin(0.0, 0.85, true, false, "Poor")],
            vec![],
        ),
        (
            SchemeId::Lifestyle(E::ExerciseDay),
            vec![
                bin(0.0, 50.0, false, true, "Poor"),
                bin(50.0, 150.0, false, true, "Average"),
                bin(150.0, INF, false, false, "Good"),
            ],
            zero("None"),
        ),
        (
            SchemeId::Lifestyle(E::ExerciseWeek),
            vec![
                bin(0.0, 150.0, true, true, "Poor"),
                bin(150.0, 300.0, false, true, "Average"),
                bin(300.0, INF, false, false, "Good"),
            ],
            vec![],
        ),
        (
            SchemeId::Lifestyle(E::EatSleepInterval),
            vec![bin(0.0, 180.0, false, true, "Poor"), bin(180.0, INF, false, false, "Good")],
            zero(MISSING_LABEL),
        ),
        (
            SchemeId::Lifestyle(E::AwakeBetween),
            vec![
                bin(0.0, 900.0, true, true, "Poor"),
                bin(900.0, 1020.0, false, true, "Average"),
                bin(1020.0, INF, false, false, "Good"),
            ],
            vec![],
        ),
        (
            SchemeId::Lifestyle(E::StartTemp),
            vec![
                bin(0.0, 60.0, true, true, "Cold"),
                bin(60.0, 67.0, false, true, "Comfortable"),
                bin(67.0, INF, false, false, "Warm"),
            ],
            vec![],
        ),
        (
            SchemeId::Lifestyle(E::StartHumidity),
            vec![
                bin(0.0, 30.0, true, true, "Low"),
                bin(30.0, 50.0, false, true, "Ideal"),
                bin(50.0, 100.0, false, true, "High"),
            ],
            vec![],
        ),
    ];
    let schemes = defs
        .into_iter()
        .map(|(id, bins, special)| (id, Scheme::new(id, bins, special).expect("default scheme is valid")))
        .collect();
    SchemeSet { schemes }
}

/// Builds one [`FeatureRow`] per record that directly follows a record for
/// the previous calendar date. The first record of each run only feeds the
/// previous-night inputs of its successor.
pub fn derive_features(records: &[DayRecord], schemes: &SchemeSet) -> Result<Vec<FeatureRow>, DiscretizeError> {
    let mut out = Vec::with_capacity(records.len());
    let output_cats = |rec: &DayRecord| -> Result<[Category; 4], DiscretizeError> {
        let mut cats = Vec::with_capacity(4);
        for &m in OutputMeasure::ALL {
            cats.push(categorize(rec.sleep.output(m), schemes.for_output(m))?);
        }
        Ok(cats.try_into().expect("four outputs"))
    };
    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if prev.night_date.succ_opt() != Some(cur.night_date) {
            continue;
        }
        let prev_cats = output_cats(prev)?;
        let mut inputs: [Option<Category>; 10] = Default::default();
        for &ev in InputEvent::ALL {
            inputs[ev.index()] = match ev.lagged_measure() {
                Some(m) => Some(prev_cats[m.index()].clone()),
                None => schemes.categorize_opt(SchemeId::Lifestyle(ev), ev.lifestyle_value(cur))?,
            };
        }
        let mut outputs = [0.0; 4];
        for &m in OutputMeasure::ALL {
            outputs[m.index()] = cur.sleep.output(m);
        }
        out.push(FeatureRow { night_date: cur.night_date, inputs, outputs, output_categories: output_cats(cur)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{sample_record, ts};

    fn cat(id: SchemeId, v: f64) -> String {
        categorize(v, default_schemes().get(id)).unwrap().to_string()
    }

    const LAT: SchemeId = SchemeId::Output(OutputMeasure::LatencyMin);

    #[test]
    fn ten_default_schemes() {
        let s = default_schemes();
        assert_eq!(s.len(), 10);
        assert_eq!(SchemeId::all().len(), 10);
        let counts: Vec<usize> = InputEvent::ALL.iter().map(|&e| s.for_input(e).categories().len()).collect();
        // awake_between, eat_sleep, ex_day, ex_week, prev_awake, prev_awakenings, prev_eff, prev_lat, hum, temp
        assert_eq!(counts, [3, 3, 4, 3, 2, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn documented_examples() {
        assert_eq!(cat(LAT, 30.0), "Average");
        assert_eq!(cat(LAT, 12.0), "Good");
        assert_eq!(cat(SchemeId::Output(OutputMeasure::Efficiency), 0.85), "Good");
        assert_eq!(cat(SchemeId::Lifestyle(InputEvent::ExerciseDay), 0.0), "None");
        assert_eq!(cat(SchemeId::Lifestyle(InputEvent::AwakeBetween), 1020.0), "Average");
        assert_eq!(
            categorize(-1.0, default_schemes().get(LAT)),
            Err(DiscretizeError::Domain { scheme: "latency_min", value: -1.0 })
        );
        assert!(categorize(f64::NAN, default_schemes().get(LAT)).is_err());
    }

    #[test]
    fn base_categories_follow_listed_order() {
        let s = default_schemes();
        assert_eq!(s.for_input(InputEvent::ExerciseDay).base_category(), "None");
        assert_eq!(s.for_input(InputEvent::PrevEfficiency).base_category(), "Good");
        assert_eq!(s.for_input(InputEvent::AwakeBetween).base_category(), "Poor");
        assert_eq!(s.for_input(InputEvent::EatSleepInterval).base_category(), "Missing");
    }

    #[test]
    fn dense_grid_exhaustive() {
        let set = default_schemes();
        for scheme in set.iter() {
            let (lo, hi) = scheme.id.domain();
            let hi = if hi.is_finite() { hi } else { 2000.0 };
            let steps = ((hi - lo) / 0.01).round() as i64;
            for k in 0..=steps {
                let v = lo + k as f64 * 0.01;
                let v = v.min(hi);
                assert_eq!(scheme.matches(v), 1, "{} at {v}", scheme.name());
                assert!(categorize(v, scheme).is_ok());
            }
        }
    }

    #[test]
    fn rejects_overlap_gap_and_duplicates() {
        let id = LAT;
        let overlap = Scheme::new(id, vec![bin(0.0, 15.0, true, true, "A"), bin(15.0, INF, true, false, "B")], vec![]);
        assert!(matches!(overlap, Err(DiscretizeError::InvalidScheme { .. })));
        let gap = Scheme::new(id, vec![bin(0.0, 15.0, true, false, "A"), bin(15.0, INF, false, false, "B")], vec![]);
        assert!(gap.is_err());
        let dup = Scheme::new(id, vec![bin(0.0, 15.0, true, true, "A"), bin(15.0, INF, false, false, "A")], vec![]);
        assert!(dup.is_err());
        let special_clash = Scheme::new(id, vec![bin(0.0, INF, true, false, "A")], vec![(0.0, "Z".into())]);
        assert!(special_clash.is_err());
        let closed_inf = Scheme::new(id, vec![bin(0.0, INF, true, true, "A")], vec![]);
        assert!(closed_inf.is_err());
        let short = Scheme::new(id, vec![bin(0.0, 100.0, true, true, "A")], vec![]);
        assert!(short.is_err());
    }

    #[test]
    fn config_overrides_one_scheme() {
        let text = r#"
            [scheme.latency_min]
            bins = [[0, 10, "lc", "rc", "Fast"], [10, inf, "lo", "ro", "Slow"]]

            [scheme.exercise_day]
            special = [[0, "Rest"]]
            bins = [[0, 60, "lo", "rc", "Light"], [60, inf, "lo", "ro", "Heavy"]]
        "#;
        let set = SchemeSet::from_config_str(text).unwrap();
        let lat = set.get(LAT);
        assert_eq!(categorize(10.0, lat).unwrap(), "Fast");
        assert_eq!(categorize(10.5, lat).unwrap(), "Slow");
        let ex = set.for_input(InputEvent::ExerciseDay);
        assert_eq!(ex.categories(), vec![Category::new("Rest"), "Light".into(), "Heavy".into()]);
        assert_eq!(set.for_input(InputEvent::StartTemp), default_schemes().for_input(InputEvent::StartTemp));
    }

    #[test]
    fn config_errors() {
        assert!(SchemeSet::from_config_str("[scheme.bogus]\nbins = []").is_err());
        let bad_flag = r#"[scheme.latency_min]
            bins = [[0, inf, "closed", "ro", "All"]]"#;
        assert!(SchemeSet::from_config_str(bad_flag).is_err());
        let gap = r#"[scheme.latency_min]
            bins = [[1, inf, "lc", "ro", "All"]]"#;
        assert!(matches!(SchemeSet::from_config_str(gap), Err(DiscretizeError::InvalidScheme { .. })));
        assert_eq!(SchemeSet::from_config_str("").unwrap(), default_schemes());
    }

    fn run(n: usize, start_day: u32) -> Vec<DayRecord> {
        (0..n)
            .map(|i| {
                let mut r = sample_record();
                let d = chrono::NaiveDate::from_ymd_opt(2021, 3, start_day + i as u32).unwrap();
                r.night_date = d;
                r.sleep.onset = d.and_hms_opt(23, 0, 0).unwrap();
                r.sleep.wake = r.sleep.onset + chrono::Duration::hours(8);
                r.awake_between_min = (i > 0).then_some(960.0);
                r
            })
            .collect()
    }

    #[test]
    fn two_night_run_gives_one_row() {
        let rows = derive_features(&run(2, 1), &default_schemes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].input(InputEvent::AwakeBetween).unwrap(), "Average");
    }

    #[test]
    fn previous_night_latency_is_lagged() {
        let mut recs = run(2, 1);
        recs[0].sleep.latency_min = 40.0;
        let rows = derive_features(&recs, &default_schemes()).unwrap();
        assert_eq!(rows[0].input(InputEvent::PrevLatency).unwrap(), "Poor");
        assert_eq!(rows[0].output(OutputMeasure::LatencyMin), 12.0);
        assert_eq!(rows[0].output_category(OutputMeasure::LatencyMin), &Category::new("Good"));
    }

    #[test]
    fn five_night_lag_table() {
        // Hand-built lag table: each night's outputs become the next row's
        // previous-night inputs.
        let mut recs = run(5, 1);
        let lat = [5.0, 20.0, 45.0, 15.0, 16.0];
        let awake = [10.0, 25.0, 20.0, 21.0, 0.0];
        let wakes = [0u32, 2, 1, 3, 0];
        let eff = [0.95, 0.85, 0.84, 0.5, 1.0];
        for i in 0..5 {
            recs[i].sleep.latency_min = lat[i];
            recs[i].sleep.awake_min = awake[i];
            recs[i].sleep.awakenings_gt5 = wakes[i];
            recs[i].sleep.efficiency = eff[i];
        }
        recs[3].start_temp_f = None;
        recs[2].eat_sleep_interval_min = None;
        let rows = derive_features(&recs, &default_schemes()).unwrap();
        assert_eq!(rows.len(), 4);
        let get = |r: &FeatureRow, e| r.input(e).map(|c| c.to_string());
        let expect = [
            ["Good", "Good", "Good", "Good"],
            ["Average", "Poor", "Poor", "Good"],
            ["Poor", "Good", "Good", "Poor"],
            ["Good", "Poor", "Poor", "Poor"],
        ];
        for (row, exp) in rows.iter().zip(expect) {
            let got = [
                get(row, InputEvent::PrevLatency),
                get(row, InputEvent::PrevAwakeMin),
                get(row, InputEvent::PrevAwakenings),
                get(row, InputEvent::PrevEfficiency),
            ];
            assert_eq!(got, exp.map(|s| Some(s.to_string())));
        }
        assert_eq!(rows[1].input(InputEvent::EatSleepInterval).unwrap(), "Missing");
        assert_eq!(rows[2].input(InputEvent::StartTemp), None);
        assert_eq!(rows[2].input(InputEvent::StartHumidity).unwrap(), "Ideal");
        assert_eq!(rows[0].input(InputEvent::ExerciseDay).unwrap(), "Poor");
        assert_eq!(rows[0].input(InputEvent::ExerciseWeek).unwrap(), "Average");
        assert_eq!(rows[0].input(InputEvent::StartTemp).unwrap(), "Comfortable");
        assert_eq!(rows[0].input(InputEvent::EatSleepInterval).unwrap(), "Good");
    }

    #[test]
    fn length_is_input_minus_runs() {
        let mut recs = run(3, 1);
        recs.extend(run(4, 10));
        recs.extend(run(2, 20));
        let rows = derive_features(&recs, &default_schemes()).unwrap();
        assert_eq!(rows.len(), 9 - 3);
        let _ = ts("2021-01-01T00:00");
    }
}
