//! Text, CSV and SVG renderings of mining results.
//!
//! Everything here is a pure function of its inputs; numbers are written
//! with fixed formats so identical results give identical bytes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::mining::{CellOutcome, EffectEstimate, JointMatrix, ScreeningResult};
use crate::model::{Category, InputEvent, OutputMeasure};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("joint matrix for {input} / {output} has no cells")]
    EmptyMatrix { input: InputEvent, output: OutputMeasure },
    #[error("screening results mix {expected} and {found}")]
    MixedMeasures { expected: OutputMeasure, found: OutputMeasure },
}

/// A rendered report: SVG markup plus its CSV data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub svg: String,
    pub csv: String,
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv of utf-8 fields")
}

/// `p` to three significant figures, plain decimal down to 1e-4 and
/// scientific below.
pub fn format_p(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let sci = format!("{p:.2e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..=0).contains(&exp) {
        return sci;
    }
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    if exp == 0 {
        return mant.to_string();
    }
    format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
}

/// Signed, two decimals.
pub fn format_delta(v: f64) -> String {
    format!("{v:+.2}")
}

const HEAT_CELL: usize = 64;
const HEAT_LEFT: usize = 150;
const HEAT_TOP: usize = 70;

/// Heatmap of row counts by input and output category, darker for larger
/// counts relative to the largest cell.
pub fn render_joint_heatmap(m: &JointMatrix) -> Result<Rendered, ReportError> {
    let n_rows = m.row_labels.len();
    let n_cols = m.col_labels.len();
    if n_rows == 0 || n_cols == 0 {
        return Err(ReportError::EmptyMatrix { input: m.input_event, output: m.output_measure });
    }
    let max = m.max();
    let width = HEAT_LEFT + n_cols * HEAT_CELL + 20;
    let height = HEAT_TOP + n_rows * HEAT_CELL + 20;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{HEAT_LEFT}" y="20" font-size="14">{} vs {}</text>"#,
        esc(m.input_event.name()),
        esc(m.output_measure.name())
    );
    for (j, label) in m.col_labels.iter().enumerate() {
        let x = HEAT_LEFT + j * HEAT_CELL + HEAT_CELL / 2;
        let _ =
            writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, HEAT_TOP - 8, esc(label.as_str()));
    }
    for (i, label) in m.row_labels.iter().enumerate() {
        let y = HEAT_TOP + i * HEAT_CELL + HEAT_CELL / 2 + 4;
        let _ =
            writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#, HEAT_LEFT - 8, esc(label.as_str()));
        for (j, &count) in m.counts[i].iter().enumerate() {
            let intensity = if max == 0 { 0.0 } else { count as f64 / max as f64 };
            let shade = |lo: f64| (255.0 - intensity * (255.0 - lo)).round() as u8;
            let fill = format!("#{:02x}{:02x}{:02x}", shade(8.0), shade(48.0), shade(107.0));
            let text_fill = if intensity > 0.5 { "#ffffff" } else { "#000000" };
            let x = HEAT_LEFT + j * HEAT_CELL;
            let y0 = HEAT_TOP + i * HEAT_CELL;
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y0}" width="{HEAT_CELL}" height="{HEAT_CELL}" fill="{fill}" stroke="#999999"/>"##
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{y}" text-anchor="middle" fill="{text_fill}">{count}</text>"#,
                x + HEAT_CELL / 2
            );
        }
    }
    svg.push_str("</svg>\n");

    let mut rows = vec![std::iter::once(m.input_event.name().to_string())
        .chain(m.col_labels.iter().map(|c| c.as_str().to_string()))
        .collect::<Vec<_>>()];
    for (label, counts) in m.row_labels.iter().zip(&m.counts) {
        rows.push(std::iter::once(label.as_str().to_string()).chain(counts.iter().map(u64::to_string)).collect());
    }
    Ok(Rendered { svg, csv: csv_string(rows) })
}

const GRID_CELL: f64 = 26.0;
const GRID_LEFT: f64 = 230.0;
const GRID_TOP: f64 = 150.0;
/// p at which a square fills its whole cell.
const GRID_P_CAP: f64 = 1e-6;

/// Side of the square drawn for a significant min-p, as a fraction of the
/// cell: `-log10(p) / 6`, capped at 1.
pub fn square_fraction(p: f64) -> f64 {
    (-p.log10() / -GRID_P_CAP.log10()).clamp(0.0, 1.0)
}

/// One row of the significance grid per (input event, input category) and
/// one column per confounder. A cell holds the smallest p over the
/// confounder's categories and gets a square only when that p is below the
/// result's threshold.
pub fn render_significance_grid(results: &[ScreeningResult], output: OutputMeasure) -> Result<Rendered, ReportError> {
    if let Some(r) = results.iter().find(|r| r.rule.output_measure != output) {
        return Err(ReportError::MixedMeasures { expected: output, found: r.rule.output_measure });
    }
    let mut inputs: Vec<InputEvent> = results.iter().map(|r| r.rule.input_event).collect();
    inputs.sort();
    inputs.dedup();
    let mut confounders: Vec<InputEvent> = results.iter().map(|r| r.rule.confounder).collect();
    confounders.sort();
    confounders.dedup();
    let find =
        |i: InputEvent, c: InputEvent| results.iter().find(|r| r.rule.input_event == i && r.rule.confounder == c);

    let mut grid_rows: Vec<(InputEvent, Category)> = Vec::new();
    for &i in &inputs {
        let first = results.iter().find(|r| r.rule.input_event == i).expect("input taken from results");
        grid_rows.extend(first.min_p_per_input_category.iter().map(|(c, _)| (i, c.clone())));
    }

    let width = GRID_LEFT + confounders.len() as f64 * GRID_CELL + 20.0;
    let height = GRID_TOP + grid_rows.len() as f64 * GRID_CELL + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="10" y="20" font-size="14">confounders for {}</text>"#, esc(output.name()));
    for (j, c) in confounders.iter().enumerate() {
        let x = GRID_LEFT + j as f64 * GRID_CELL + GRID_CELL / 2.0 + 4.0;
        let y = GRID_TOP - 6.0;
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" transform="rotate(-60 {x} {y})">{}</text>"#, esc(c.name()));
    }
    let mut csv_rows = vec![["input_event", "input_category", "confounder", "min_p", "alpha", "significant"]
        .map(String::from)
        .to_vec()];
    for (k, (i, ic)) in grid_rows.iter().enumerate() {
        let y0 = GRID_TOP + k as f64 * GRID_CELL;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}={}</text>"#,
            GRID_LEFT - 6.0,
            y0 + GRID_CELL / 2.0 + 4.0,
            esc(i.name()),
            esc(ic.as_str())
        );
        for (j, &c) in confounders.iter().enumerate() {
            let x0 = GRID_LEFT + j as f64 * GRID_CELL;
            let _ = writeln!(
                svg,
                r##"<rect x="{x0}" y="{y0}" width="{GRID_CELL}" height="{GRID_CELL}" fill="none" stroke="#cccccc"/>"##
            );
            let Some(r) = find(*i, c) else { continue };
            let min_p = r.min_p_per_input_category.iter().find(|(cat, _)| cat == ic).and_then(|(_, p)| *p);
            let significant = min_p.is_some_and(|p| p < r.alpha);
            if let (true, Some(p)) = (significant, min_p) {
                let side = GRID_CELL * square_fraction(p);
                let off = (GRID_CELL - side) / 2.0;
                let _ = writeln!(
                    svg,
                    r##"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="#c0392b"><title>p={}</title></rect>"##,
                    x0 + off,
                    y0 + off,
                    format_p(p)
                );
            }
            csv_rows.push(vec![
                i.name().to_string(),
                ic.as_str().to_string(),
                c.name().to_string(),
                min_p.map(|p| p.to_string()).unwrap_or_default(),
                r.alpha.to_string(),
                significant.to_string(),
            ]);
        }
    }
    svg.push_str("</svg>\n");
    Ok(Rendered { svg, csv: csv_string(csv_rows) })
}

/// Effects as CSV (long format, one line per estimate) and an aligned text
/// table with one column per output. Estimates without a significant
/// comparison render as `0`; the CSV's `sentinel` column tells them apart
/// from a real zero.
pub fn render_effects_table(estimates: &[EffectEstimate]) -> (String, String) {
    let mut csv_rows = vec![[
        "input_event",
        "input_category",
        "base_category",
        "output_measure",
        "avg_effect",
        "sentinel",
        "n_significant",
        "n_tests",
    ]
    .map(String::from)
    .to_vec()];
    for e in estimates {
        csv_rows.push(vec![
            e.input_event.name().to_string(),
            e.input_category.as_str().to_string(),
            e.base_category.as_str().to_string(),
            e.output_measure.name().to_string(),
            e.avg_effect.map(|v| v.to_string()).unwrap_or_else(|| "0".to_string()),
            e.avg_effect.is_none().to_string(),
            e.n_significant.to_string(),
            e.n_tests.to_string(),
        ]);
    }

    let mut keys: Vec<(InputEvent, Category, Category)> = Vec::new();
    for e in estimates {
        let key = (e.input_event, e.input_category.clone(), e.base_category.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut table: Vec<Vec<String>> = vec![["input_event", "category", "vs base"]
        .into_iter()
        .map(String::from)
        .chain(OutputMeasure::ALL.iter().map(|m| m.name().to_string()))
        .collect()];
    for (ev, cat, base) in &keys {
        let mut line = vec![ev.name().to_string(), cat.as_str().to_string(), base.as_str().to_string()];
        for &m in OutputMeasure::ALL {
            let cell = estimates
                .iter()
                .find(|e| e.input_event == *ev && &e.input_category == cat && e.output_measure == m)
                .map(|e| e.avg_effect.map(format_delta).unwrap_or_else(|| "0".to_string()))
                .unwrap_or_default();
            line.push(cell);
        }
        table.push(line);
    }
    (csv_string(csv_rows), align(&table, 3))
}

/// Left-aligns the first `text_cols` columns, right-aligns the rest.
fn align(table: &[Vec<String>], text_cols: usize) -> String {
    let n = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..n).map(|j| table.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in table {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(
                |(j, s)| {
                    if j < text_cols {
                        format!("{s:<w$}", w = widths[j])
                    } else {
                        format!("{s:>w$}", w = widths[j])
                    }
                },
            )
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// One screening result laid out as input categories by confounder
/// categories: the conditioned mean difference and whether it is
/// significant.
pub fn render_screening_table(r: &ScreeningResult) -> String {
    let mut conf_cats: Vec<&Category> = Vec::new();
    for c in &r.cells {
        if !conf_cats.contains(&&c.confounder_category) {
            conf_cats.push(&c.confounder_category);
        }
    }
    let mut table =
        vec![std::iter::once(format!("{}", r.rule))
            .chain(conf_cats.iter().flat_map(|c| {
                [format!("{}={} dmean", r.rule.confounder, c), "p".to_string(), "significant".to_string()]
            }))
            .collect::<Vec<_>>()];
    for (ic, _) in &r.min_p_per_input_category {
        let mut line = vec![format!("{}={}", r.rule.input_event, ic)];
        for cc in &conf_cats {
            let cell = r.cells.iter().find(|c| &c.input_category == ic && &c.confounder_category == *cc);
            match cell.map(|c| &c.outcome) {
                Some(CellOutcome::Tested(t)) => {
                    line.push(format_delta(t.mean_diff));
                    line.push(format_p(t.p));
                    line.push(if t.p < r.alpha { "yes" } else { "no" }.to_string());
                }
                _ => line.extend(["n/a", "", "no"].map(String::from)),
            }
        }
        table.push(line);
    }
    align(&table, 1)
}

/// A header line, then every significant screening cell sorted by p (ties
/// keep rule order).
pub fn render_summary(results: &[ScreeningResult], alpha: f64) -> String {
    let mut lines: Vec<(f64, String)> = Vec::new();
    for r in results {
        for c in r.significant_cells() {
            let t = c.test().expect("significant cells are tested");
            lines.push((
                t.p,
                format!(
                    "{}={} -> {} | C={}={} | dmean={} | p={}",
                    r.rule.input_event,
                    c.input_category,
                    r.rule.output_measure,
                    r.rule.confounder,
                    c.confounder_category,
                    format_delta(t.mean_diff),
                    format_p(t.p)
                ),
            ));
        }
    }
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out =
        format!("# {} significant conditioned cells across {} rules (alpha = {alpha})\n", lines.len(), results.len());
    for (_, l) in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}
