//! The two-stage experiment engine.
//!
//! Stage 1 ([`screen_confounder`]) asks, for a rule `input -[C]-> output`,
//! whether conditioning on a confounder category shifts the output
//! distribution of an input category. It compares each baseline sample with
//! its own conditioned subset, so the two samples are dependent and the test
//! is conservative.
//!
//! Stage 2 ([`estimate_effect`]) holds each confounder category fixed and
//! compares an input category against the scheme's base category, averaging
//! the significant mean differences into one effect.

use rayon::prelude::*;
use thiserror::Error;

use crate::discretize::SchemeSet;
use crate::model::{Category, FeatureRow, InputEvent, OutputMeasure, RuleTuple};
use crate::stats::{welch_t, TestResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiningError {
    #[error("`{category}` is the base category of {event}; effects are measured against it")]
    BaseCategoryQuery { event: InputEvent, category: Category },
    #[error("`{category}` is not a category of {event}")]
    UnknownCategory { event: InputEvent, category: Category },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningConfig {
    pub alpha: f64,
    /// Smallest sample size either side of a test may have.
    pub min_n: usize,
    /// Divide alpha by the number of tests within each screening result or
    /// effect estimate.
    pub bonferroni: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self { alpha: 0.05, min_n: 3, bonferroni: false }
    }
}

impl MiningConfig {
    fn threshold(&self, n_tests: usize) -> f64 {
        if self.bonferroni && n_tests > 0 {
            self.alpha / n_tests as f64
        } else {
            self.alpha
        }
    }
}

/// Output values of rows whose `input_event` is `input_category`. Rows where
/// the input is unavailable never match.
pub fn baseline_sample(
    rows: &[FeatureRow],
    input_event: InputEvent,
    input_category: &Category,
    output_measure: OutputMeasure,
) -> Vec<f64> {
    rows.iter().filter(|r| r.input(input_event) == Some(input_category)).map(|r| r.output(output_measure)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellOutcome {
    Tested(TestResult),
    /// A sample fell below `min_n`.
    Insufficient {
        n_a: usize,
        n_b: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningCell {
    pub input_category: Category,
    pub confounder_category: Category,
    pub outcome: CellOutcome,
}

impl ScreeningCell {
    pub fn test(&self) -> Option<&TestResult> {
        match &self.outcome {
            CellOutcome::Tested(t) => Some(t),
            CellOutcome::Insufficient { .. } => None,
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.test().is_some_and(|t| t.p < alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningResult {
    pub rule: RuleTuple,
    /// Input categories outer, confounder categories inner, both in scheme
    /// order.
    pub cells: Vec<ScreeningCell>,
    /// Per input category, the smallest p over its confounder categories;
    /// `None` when none of them could be tested.
    pub min_p_per_input_category: Vec<(Category, Option<f64>)>,
    /// Per-test significance threshold (after any correction).
    pub alpha: f64,
}

impl ScreeningResult {
    pub fn significant_cells(&self) -> impl Iterator<Item = &ScreeningCell> {
        self.cells.iter().filter(|c| c.significant(self.alpha))
    }

    /// Some conditioned cell differs significantly from its baseline.
    pub fn flagged(&self) -> bool {
        self.significant_cells().next().is_some()
    }

    pub fn tested_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.test().is_some()).count()
    }

    pub fn cell(&self, input_category: &str, confounder_category: &str) -> Option<&ScreeningCell> {
        self.cells.iter().find(|c| {
            c.input_category.as_str() == input_category && c.confounder_category.as_str() == confounder_category
        })
    }
}

/// Stage 1 for one rule: every input category's baseline against the same
/// sample restricted to each confounder category.
///
/// Rows with either the input or the confounder unavailable are left out of
/// this rule.
pub fn screen_confounder(
    rows: &[FeatureRow],
    rule: RuleTuple,
    schemes: &SchemeSet,
    cfg: &MiningConfig,
) -> ScreeningResult {
    let in_cats = schemes.for_input(rule.input_event).categories();
    let c_cats = schemes.for_input(rule.confounder).categories();
    let mut cells = Vec::with_capacity(in_cats.len() * c_cats.len());
    for ic in &in_cats {
        let baseline: Vec<(&Category, f64)> = rows
            .iter()
            .filter(|r| r.input(rule.input_event) == Some(ic))
            .filter_map(|r| r.input(rule.confounder).map(|c| (c, r.output(rule.output_measure))))
            .collect();
        let a: Vec<f64> = baseline.iter().map(|(_, v)| *v).collect();
        for cc in &c_cats {
            let b: Vec<f64> = baseline.iter().filter(|(c, _)| *c == cc).map(|(_, v)| *v).collect();
            let outcome = if a.len() < cfg.min_n.max(2) || b.len() < cfg.min_n.max(2) {
                CellOutcome::Insufficient { n_a: a.len(), n_b: b.len() }
            } else {
                CellOutcome::Tested(welch_t(&a, &b).expect("both samples meet min_n >= 2"))
            };
            cells.push(ScreeningCell { input_category: ic.clone(), confounder_category: cc.clone(), outcome });
        }
    }
    let min_p_per_input_category = in_cats
        .iter()
        .map(|ic| {
            let min = cells
                .iter()
                .filter(|c| &c.input_category == ic)
                .filter_map(|c| c.test().map(|t| t.p))
                .min_by(f64::total_cmp);
            (ic.clone(), min)
        })
        .collect();
    let tested = cells.iter().filter(|c| c.test().is_some()).count();
    ScreeningResult { rule, cells, min_p_per_input_category, alpha: cfg.threshold(tested) }
}

/// Every rule with confounder distinct from input, ordered by input,
/// output, then confounder name.
pub fn all_rules() -> Vec<RuleTuple> {
    let mut rules = Vec::with_capacity(360);
    for &i in InputEvent::ALL {
        for &o in OutputMeasure::ALL {
            for &c in InputEvent::ALL {
                rules.extend(RuleTuple::new(i, o, c));
            }
        }
    }
    rules
}

/// Stage 1 across all 360 rules.
pub fn screen_all(rows: &[FeatureRow], schemes: &SchemeSet, cfg: &MiningConfig) -> Vec<ScreeningResult> {
    all_rules().into_par_iter().map(|rule| screen_confounder(rows, rule, schemes, cfg)).collect()
}

/// One significant conditioned comparison feeding an effect estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub confounder: InputEvent,
    pub confounder_category: Category,
    pub mean_diff: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate {
    pub input_event: InputEvent,
    pub input_category: Category,
    pub output_measure: OutputMeasure,
    pub base_category: Category,
    /// Mean of the contributing differences; `None` when no conditioned
    /// comparison was significant.
    pub avg_effect: Option<f64>,
    pub n_significant: usize,
    /// Conditioned comparisons that had enough data to run.
    pub n_tests: usize,
    pub contributing: Vec<Contribution>,
}

/// Stage 2: effect of `input_category` relative to the base category on
/// `output_measure`, matched on every category of every other input.
pub fn estimate_effect(
    rows: &[FeatureRow],
    input_event: InputEvent,
    input_category: &Category,
    output_measure: OutputMeasure,
    schemes: &SchemeSet,
    cfg: &MiningConfig,
) -> Result<EffectEstimate, MiningError> {
    let scheme = schemes.for_input(input_event);
    let base = scheme.base_category();
    if *input_category == base {
        return Err(MiningError::BaseCategoryQuery { event: input_event, category: base });
    }
    if !scheme.has_category(input_category.as_str()) {
        return Err(MiningError::UnknownCategory { event: input_event, category: input_category.clone() });
    }
    let mut tests = Vec::new();
    for &conf in InputEvent::ALL.iter().filter(|&&c| c != input_event) {
        for cc in schemes.for_input(conf).categories() {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for r in rows.iter().filter(|r| r.input(conf) == Some(&cc)) {
                match r.input(input_event) {
                    Some(c) if *c == base => a.push(r.output(output_measure)),
                    Some(c) if c == input_category => b.push(r.output(output_measure)),
                    _ => {}
                }
            }
            if a.len() >= cfg.min_n.max(2) && b.len() >= cfg.min_n.max(2) {
                let t = welch_t(&a, &b).expect("both samples meet min_n >= 2");
                tests.push((conf, cc, t));
            }
        }
    }
    let threshold = cfg.threshold(tests.len());
    let contributing: Vec<Contribution> = tests
        .iter()
        .filter(|(_, _, t)| t.p < threshold)
        .map(|(conf, cc, t)| Contribution {
            confounder: *conf,
            confounder_category: cc.clone(),
            mean_diff: t.mean_diff,
            p: t.p,
        })
        .collect();
    let avg_effect = (!contributing.is_empty())
        .then(|| contributing.iter().map(|c| c.mean_diff).sum::<f64>() / contributing.len() as f64);
    Ok(EffectEstimate {
        input_event,
        input_category: input_category.clone(),
        output_measure,
        base_category: base,
        avg_effect,
        n_significant: contributing.len(),
        n_tests: tests.len(),
        contributing,
    })
}

/// Stage 2 for every input event, non-base category, and output, in that
/// nesting order (events and outputs by name, categories in scheme order).
pub fn effects_all(rows: &[FeatureRow], schemes: &SchemeSet, cfg: &MiningConfig) -> Vec<EffectEstimate> {
    let mut tasks = Vec::new();
    for &ev in InputEvent::ALL {
        let scheme = schemes.for_input(ev);
        for cat in scheme.categories().into_iter().skip(1) {
            for &m in OutputMeasure::ALL {
                tasks.push((ev, cat.clone(), m));
            }
        }
    }
    tasks
        .into_par_iter()
        .map(|(ev, cat, m)| estimate_effect(rows, ev, &cat, m, schemes, cfg).expect("task categories are non-base"))
        .collect()
}

/// Counts of rows by (input category, output category).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointMatrix {
    pub input_event: InputEvent,
    pub output_measure: OutputMeasure,
    pub row_labels: Vec<Category>,
    pub col_labels: Vec<Category>,
    /// `counts[i][o]`.
    pub counts: Vec<Vec<u64>>,
}

impl JointMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }
}

pub fn joint_distribution(
    rows: &[FeatureRow],
    input_event: InputEvent,
    output_measure: OutputMeasure,
    schemes: &SchemeSet,
) -> JointMatrix {
    let row_labels = schemes.for_input(input_event).categories();
    let col_labels = schemes.for_output(output_measure).categories();
    let mut counts = vec![vec![0u64; col_labels.len()]; row_labels.len()];
    for r in rows {
        let Some(ic) = r.input(input_event) else { continue };
        let oc = r.output_category(output_measure);
        if let (Some(i), Some(o)) = (row_labels.iter().position(|c| c == ic), col_labels.iter().position(|c| c == oc)) {
            counts[i][o] += 1;
        }
    }
    JointMatrix { input_event, output_measure, row_labels, col_labels, counts }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::discretize::{categorize, default_schemes, Bin, Scheme, SchemeId};
    use chrono::NaiveDate;

    /// A feature row with default-valid categories everywhere; tests then
    /// override what they need.
    pub(crate) fn row(day: u32) -> FeatureRow {
        let s = default_schemes();
        let mut inputs: [Option<Category>; 10] = Default::default();
        for &e in InputEvent::ALL {
            inputs[e.index()] = Some(s.for_input(e).base_category());
        }
        let outputs = [10.0, 1.0, 0.9, 12.0];
        let output_categories = [Category::new("Good"), "Good".into(), "Good".into(), "Good".into()];
        FeatureRow {
            night_date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap() + chrono::Duration::days(day as i64),
            inputs,
            outputs,
            output_categories,
        }
    }

    fn set(r: &mut FeatureRow, e: InputEvent, c: &str) {
        r.inputs[e.index()] = Some(Category::new(c));
    }

    fn set_out(r: &mut FeatureRow, m: OutputMeasure, v: f64) {
        r.outputs[m.index()] = v;
        r.output_categories[m.index()] = categorize(v, default_schemes().for_output(m)).unwrap();
    }

    /// Ten rows; awake_between / awake_min values chosen by hand.
    pub(crate) fn ten_rows() -> Vec<FeatureRow> {
        let spec: [(&str, f64, Option<&str>); 10] = [
            ("Poor", 25.0, Some("Good")),
            ("Poor", 30.0, Some("Poor")),
            ("Average", 12.0, Some("Good")),
            ("Good", 8.0, Some("Good")),
            ("Poor", 22.0, Some("Poor")),
            ("Average", 19.0, Some("Poor")),
            ("Good", 5.0, None),
            ("Average", 21.0, Some("Good")),
            ("Good", 11.0, Some("Poor")),
            ("Poor", 15.0, Some("Good")),
        ];
        spec.iter()
            .enumerate()
            .map(|(i, (between, awake, prev))| {
                let mut r = row(i as u32);
                set(&mut r, InputEvent::AwakeBetween, between);
                set_out(&mut r, OutputMeasure::AwakeMin, *awake);
                r.inputs[InputEvent::PrevAwakeMin.index()] = prev.map(Category::new);
                r
            })
            .collect()
    }

    #[test]
    fn baseline_selection() {
        let rows = ten_rows();
        let poor = baseline_sample(&rows, InputEvent::AwakeBetween, &"Poor".into(), OutputMeasure::AwakeMin);
        assert_eq!(poor, [25.0, 30.0, 22.0, 15.0]);
        let good = baseline_sample(&rows, InputEvent::AwakeBetween, &"Good".into(), OutputMeasure::AwakeMin);
        assert_eq!(good, [8.0, 5.0, 11.0]);
        let missing = baseline_sample(&rows, InputEvent::StartTemp, &"Warm".into(), OutputMeasure::AwakeMin);
        assert!(missing.is_empty());
        let all = baseline_sample(&rows, InputEvent::StartTemp, &"Cold".into(), OutputMeasure::AwakeMin);
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn joint_counts() {
        let s = default_schemes();
        let rows = ten_rows();
        let m = joint_distribution(&rows, InputEvent::AwakeBetween, OutputMeasure::AwakeMin, &s);
        // Rows Poor/Average/Good, cols Good (<=20) / Poor.
        assert_eq!(m.counts, vec![vec![1, 3], vec![2, 1], vec![3, 0]]);
        assert_eq!(m.total(), 10);
        let m = joint_distribution(&rows, InputEvent::PrevAwakeMin, OutputMeasure::AwakeMin, &s);
        assert_eq!(m.total(), 9);
        let empty = joint_distribution(&[], InputEvent::PrevAwakeMin, OutputMeasure::AwakeMin, &s);
        assert!(empty.counts.iter().flatten().all(|&c| c == 0));
        let one = joint_distribution(&rows[..1], InputEvent::AwakeBetween, OutputMeasure::AwakeMin, &s);
        assert_eq!(one.total(), 1);
        assert_eq!(one.counts[0][1], 1);
    }

    #[test]
    fn screening_shape_and_subsets() {
        let s = default_schemes();
        let rows = ten_rows();
        let rule = RuleTuple::new(InputEvent::AwakeBetween, OutputMeasure::AwakeMin, InputEvent::PrevAwakeMin).unwrap();
        let res = screen_confounder(&rows, rule, &s, &MiningConfig { min_n: 2, ..Default::default() });
        assert_eq!(res.cells.len(), 6);
        // Poor baseline (all four have the confounder): {25, 30, 22, 15};
        // Good-conditioned {25, 15}, Poor-conditioned {30, 22}.
        let good = res.cell("Poor", "Good").unwrap().test().unwrap();
        assert_eq!((good.n_a, good.n_b), (4, 2));
        assert!((good.mean_diff - (20.0 - 23.0)).abs() < 1e-12);
        let poor = res.cell("Poor", "Poor").unwrap().test().unwrap();
        assert!((poor.mean_diff - (26.0 - 23.0)).abs() < 1e-12);
        // Good baseline drops the row whose confounder is unavailable.
        assert!(matches!(res.cell("Good", "Good").unwrap().outcome, CellOutcome::Insufficient { n_a: 2, n_b: 1 }));
        for c in &res.cells {
            if let Some(t) = c.test() {
                assert!(t.n_b <= t.n_a);
            }
        }
        let min_poor = res.min_p_per_input_category[0].1.unwrap();
        assert_eq!(min_poor, good.p.min(poor.p));
    }

    #[test]
    fn three_hundred_sixty_rules() {
        let s = default_schemes();
        let rules = all_rules();
        assert_eq!(rules.len(), 360);
        let mut sorted = rules.clone();
        sorted.sort_by_key(|r| (r.input_event.name(), r.output_measure.name(), r.confounder.name()));
        assert_eq!(rules, sorted);
        let res = screen_all(&[], &s, &MiningConfig::default());
        assert_eq!(res.len(), 360);
        assert!(res.iter().all(|r| r.cells.iter().all(|c| c.test().is_none())));
        assert!(res.iter().all(|r| r.min_p_per_input_category.iter().all(|(_, p)| p.is_none())));
    }

    #[test]
    fn effect_counting_follows_schemes() {
        let s = default_schemes();
        let est = effects_all(&[], &s, &MiningConfig::default());
        // Non-base categories: 2+2+3+2+1+1+1+2+2+2 = 18, times four outputs.
        assert_eq!(est.len(), 72);
        assert!(est.iter().all(|e| e.avg_effect.is_none() && e.n_significant == 0));

        // Three-category sleep schemes give {3,3,3,3,4,3,3,3,3,3} categories.
        let three = |id, cut: f64, hi: f64| {
            Scheme::new(
                id,
                vec![
                    Bin { lower: 0.0, upper: cut, lower_closed: true, upper_closed: true, label: "Good".into() },
                    Bin {
                        lower: cut,
                        upper: 2.0 * cut,
                        lower_closed: false,
                        upper_closed: true,
                        label: "Average".into(),
                    },
                    Bin {
                        lower: 2.0 * cut,
                        upper: hi,
                        lower_closed: false,
                        upper_closed: hi.is_finite(),
                        label: "Poor".into(),
                    },
                ],
                vec![],
            )
            .unwrap()
        };
        let s3 = default_schemes()
            .with(three(SchemeId::Output(OutputMeasure::AwakeMin), 20.0, f64::INFINITY))
            .with(three(SchemeId::Output(OutputMeasure::AwakeningsGt5), 1.0, f64::INFINITY))
            .with(three(SchemeId::Output(OutputMeasure::Efficiency), 0.3, 1.0));
        assert_eq!(effects_all(&[], &s3, &MiningConfig::default()).len(), 84);
    }

    #[test]
    fn base_category_query_rejected() {
        let s = default_schemes();
        let err = estimate_effect(
            &[],
            InputEvent::ExerciseDay,
            &"None".into(),
            OutputMeasure::LatencyMin,
            &s,
            &MiningConfig::default(),
        );
        assert!(matches!(err, Err(MiningError::BaseCategoryQuery { .. })));
        let err = estimate_effect(
            &[],
            InputEvent::ExerciseDay,
            &"Lots".into(),
            OutputMeasure::LatencyMin,
            &s,
            &MiningConfig::default(),
        );
        assert!(matches!(err, Err(MiningError::UnknownCategory { .. })));
    }

    #[test]
    fn planted_difference_is_averaged() {
        // Exercise Good rows have latency 10 lower than None rows under every
        // context; with small deterministic jitter every conditioned test is
        // significant and the average is exactly the shift.
        let s = default_schemes();
        let mut rows = Vec::new();
        for i in 0..40u32 {
            let mut r = row(i);
            let good = i % 2 == 1;
            set(&mut r, InputEvent::ExerciseDay, if good { "Good" } else { "None" });
            let jitter = [0.0, 1.0, -1.0, 0.5][(i as usize / 2) % 4];
            set_out(&mut r, OutputMeasure::LatencyMin, 25.0 + jitter - if good { 10.0 } else { 0.0 });
            rows.push(r);
        }
        let e = estimate_effect(
            &rows,
            InputEvent::ExerciseDay,
            &"Good".into(),
            OutputMeasure::LatencyMin,
            &s,
            &MiningConfig::default(),
        )
        .unwrap();
        // Only base categories are populated for the nine confounders.
        assert_eq!(e.n_tests, 9);
        assert_eq!(e.n_significant, 9);
        assert!((e.avg_effect.unwrap() + 10.0).abs() < 1e-12);
        assert_eq!(e.base_category, "None");

        let nothing = estimate_effect(
            &rows,
            InputEvent::ExerciseDay,
            &"Poor".into(),
            OutputMeasure::LatencyMin,
            &s,
            &MiningConfig::default(),
        )
        .unwrap();
        assert_eq!(nothing.avg_effect, None);
        assert_eq!(nothing.n_tests, 0);

        let strict = MiningConfig { alpha: 0.0, ..Default::default() };
        let e0 =
            estimate_effect(&rows, InputEvent::ExerciseDay, &"Good".into(), OutputMeasure::LatencyMin, &s, &strict)
                .unwrap();
        assert_eq!(e0.avg_effect, None);
    }

    #[test]
    fn bonferroni_tightens_threshold() {
        let s = default_schemes();
        let rows = ten_rows();
        let rule = RuleTuple::new(InputEvent::AwakeBetween, OutputMeasure::AwakeMin, InputEvent::PrevAwakeMin).unwrap();
        let plain = screen_confounder(&rows, rule, &s, &MiningConfig { min_n: 2, ..Default::default() });
        let corrected =
            screen_confounder(&rows, rule, &s, &MiningConfig { min_n: 2, bonferroni: true, ..Default::default() });
        assert_eq!(plain.alpha, 0.05);
        assert!((corrected.alpha - 0.05 / corrected.tested_cells() as f64).abs() < 1e-15);
    }
}
