//! The `sleepmine` command line.
//!
//! Exit codes: 0 success, 1 malformed input or invalid settings, 2 I/O
//! failure, 3 no analyzable nights.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::discretize::{default_schemes, derive_features, SchemeSet};
use crate::ingest::{
    filter_consecutive, load_day_records, merge_day_records, parse_activity_log, parse_environment_log, parse_meal_log,
    parse_sleep_log, read_day_records, write_day_records, IngestError, MergePolicy,
};
use crate::mining::{effects_all, joint_distribution, screen_all, MiningConfig};
use crate::model::{InputEvent, OutputMeasure};
use crate::report::{render_effects_table, render_joint_heatmap, render_significance_grid, render_summary};
use crate::synth::{generate_with, GeneratorSpec};

#[derive(Debug, Parser)]
#[command(name = "sleepmine", version, about = "Mine lifestyle effects on sleep from personal logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge raw logs into one record per night.
    Ingest(IngestArgs),
    /// Run both mining stages and write every report.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic record file.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Sleep sessions CSV (onset, wake, latency_min, awake_min, awakenings_gt5, efficiency).
    #[arg(long)]
    pub sleep: PathBuf,
    /// Activity CSV (start, duration_min, kind).
    #[arg(long)]
    pub activity: Option<PathBuf>,
    /// Environment CSV (at, temperature_f, humidity_pct).
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Meal CSV (at).
    #[arg(long)]
    pub meals: Option<PathBuf>,
    #[arg(long, default_value = "dayrecords.csv")]
    pub out: PathBuf,
    /// Shortest run of consecutive nights to keep.
    #[arg(long, default_value_t = 2)]
    pub min_run: usize,
    /// Minutes around sleep onset to look for an environment sample.
    #[arg(long, default_value_t = 30.0)]
    pub env_window: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Day records CSV, or `-` for stdin.
    #[arg(long)]
    pub records: PathBuf,
    /// TOML file overriding discretization schemes.
    #[arg(long)]
    pub schemes: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Smallest sample size on either side of a t-test.
    #[arg(long, default_value_t = 3)]
    pub min_n: usize,
    #[arg(long, default_value = "./reports")]
    pub out_dir: PathBuf,
    /// Divide alpha by the number of tests in each rule or estimate.
    #[arg(long)]
    pub bonferroni: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator spec; defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_days: Option<usize>,
    /// TOML file overriding discretization schemes.
    #[arg(long)]
    pub schemes: Option<PathBuf>,
    /// Output CSV, or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

/// An error message with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Self::new(2, format!("{}: {e}", path.display()))
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let code = match e {
            IngestError::File { .. } | IngestError::Write(_) => 2,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

/// Runs a parsed command line, returning the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, out, err),
        Command::Analyze(a) => cmd_analyze(&a, out, err),
        Command::Synth(a) => cmd_synth(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_schemes(path: Option<&Path>) -> Result<SchemeSet, Failure> {
    match path {
        None => Ok(default_schemes()),
        Some(p) => SchemeSet::from_config_file(p).map_err(|e| Failure::new(1, e.to_string())),
    }
}

pub fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    if !(a.env_window >= 0.0) {
        return Err(Failure::new(1, format!("--env-window must be >= 0, got {}", a.env_window)));
    }
    let sessions = parse_sleep_log(&a.sleep)?;
    let activities = a.activity.as_deref().map(parse_activity_log).transpose()?.unwrap_or_default();
    let env = a.env.as_deref().map(parse_environment_log).transpose()?.unwrap_or_default();
    let meals = a.meals.as_deref().map(parse_meal_log).transpose()?.unwrap_or_default();
    let policy = MergePolicy { env_window_min: a.env_window, ..Default::default() };
    let merged = merge_day_records(&sessions, &activities, &env, &meals, &policy)?;
    let kept = filter_consecutive(&merged, a.min_run)?;

    let file = fs::File::create(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    write_day_records(io::BufWriter::new(file), &kept)?;

    let _ = writeln!(out, "sleep sessions: {}", sessions.len());
    let _ = writeln!(out, "activities: {}", activities.len());
    let _ = writeln!(out, "environment samples: {}", env.len());
    let _ = writeln!(out, "meals: {}", meals.len());
    let _ = writeln!(out, "merged nights: {}", merged.len());
    let _ = writeln!(
        out,
        "consecutive runs of >= {}: kept {}, dropped {}",
        a.min_run,
        kept.len(),
        merged.len() - kept.len()
    );
    if kept.is_empty() {
        let _ = writeln!(err, "warning: no run of {} consecutive nights; {} is empty", a.min_run, a.out.display());
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
}

pub fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&a.alpha) {
        return Err(Failure::new(1, format!("--alpha must be in [0, 1], got {}", a.alpha)));
    }
    if a.min_n < 2 {
        return Err(Failure::new(1, format!("--min-n must be at least 2, got {}", a.min_n)));
    }
    let schemes = load_schemes(a.schemes.as_deref())?;
    let records = if a.records.as_os_str() == "-" {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(|e| Failure::io(&a.records, e))?;
        read_day_records(buf.as_slice(), Path::new("<stdin>"))?
    } else {
        load_day_records(&a.records)?
    };
    let records = filter_consecutive(&records, 2)?;
    let rows = derive_features(&records, &schemes).map_err(|e| Failure::new(1, e.to_string()))?;
    if rows.is_empty() {
        return Err(Failure::new(3, "no pair of consecutive nights to analyze"));
    }

    let cfg = MiningConfig { alpha: a.alpha, min_n: a.min_n, bonferroni: a.bonferroni };
    let results = screen_all(&rows, &schemes, &cfg);
    let effects = effects_all(&rows, &schemes, &cfg);

    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::io(&a.out_dir, e))?;
    for &ev in InputEvent::ALL {
        for &m in OutputMeasure::ALL {
            let r = render_joint_heatmap(&joint_distribution(&rows, ev, m, &schemes))
                .map_err(|e| Failure::new(1, e.to_string()))?;
            write_file(&a.out_dir, &format!("joint_{}_{}.svg", ev, m), &r.svg)?;
            write_file(&a.out_dir, &format!("joint_{}_{}.csv", ev, m), &r.csv)?;
        }
    }
    for &m in OutputMeasure::ALL {
        let subset: Vec<_> = results.iter().filter(|r| r.rule.output_measure == m).cloned().collect();
        let g = render_significance_grid(&subset, m).map_err(|e| Failure::new(1, e.to_string()))?;
        write_file(&a.out_dir, &format!("screen_{m}.svg"), &g.svg)?;
        write_file(&a.out_dir, &format!("screen_{m}.csv"), &g.csv)?;
    }
    let (effects_csv, effects_txt) = render_effects_table(&effects);
    write_file(&a.out_dir, "effects.csv", &effects_csv)?;
    write_file(&a.out_dir, "effects.txt", &effects_txt)?;
    write_file(&a.out_dir, "summary.txt", &render_summary(&results, a.alpha))?;

    let flagged = results.iter().filter(|r| r.flagged()).count();
    let significant = effects.iter().filter(|e| e.avg_effect.is_some()).count();
    let _ = writeln!(out, "nights: {}, analyzable pairs: {}", records.len(), rows.len());
    let _ = writeln!(out, "rules flagged: {flagged} of {}", results.len());
    let _ = writeln!(out, "effects with a significant comparison: {significant} of {}", effects.len());
    let _ = writeln!(out, "reports written to {}", a.out_dir.display());
    if flagged == 0 {
        let _ = writeln!(err, "note: no rule reached significance at alpha = {}", a.alpha);
    }
    Ok(())
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let schemes = load_schemes(a.schemes.as_deref())?;
    let mut spec = match &a.spec {
        Some(p) => GeneratorSpec::from_config_file(p, &schemes).map_err(|e| Failure::new(1, e.to_string()))?,
        None => GeneratorSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.n_days {
        spec.n_days = n;
    }
    let (records, _) = generate_with(&spec, &schemes).map_err(|e| Failure::new(1, e.to_string()))?;
    if a.out.as_os_str() == "-" {
        write_day_records(out, &records)?;
    } else {
        let file = fs::File::create(&a.out).map_err(|e| Failure::io(&a.out, e))?;
        write_day_records(io::BufWriter::new(file), &records)?;
    }
    Ok(())
}
