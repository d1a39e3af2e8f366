//! Single-subject event mining for sleep logs.
//!
//! Raw sleep, activity, environment and meal logs are merged into one
//! [`DayRecord`] per night, discretized into categories, and mined for
//! lifestyle categories whose nights differ in sleep outcome after
//! conditioning on a second event.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod discretize;
pub mod error;
pub mod ingest;
pub mod mining;
pub mod model;
pub mod report;
pub mod stats;
pub mod synth;

pub use discretize::{categorize, default_schemes, derive_features, Scheme, SchemeId, SchemeSet};
pub use error::UnknownName;
pub use ingest::{filter_consecutive, merge_day_records, MergePolicy};
pub use mining::{effects_all, joint_distribution, screen_all, EffectEstimate, MiningConfig, ScreeningResult};
pub use model::{Category, DayRecord, FeatureRow, InputEvent, OutputMeasure, RuleTuple, SleepSession};
pub use stats::{welch_t, TestResult};
pub use synth::{generate, GeneratorSpec};
