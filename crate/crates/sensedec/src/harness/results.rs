//! Result rows and their CSV form. Every experiment reports through the
//! same schema so downstream plotting needs exactly one reader:
//!
//! `experiment,condition,presentation,rule,seed,accuracy,mean_ce,channel_uses`
//!
//! Floats carry six significant digits; rows are sorted on
//! `(experiment, condition, presentation, rule, seed)` with conditions
//! ordered numerically, so repeated runs of the same configuration emit
//! byte-identical files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gcm::StressMode;

pub const CSV_HEADER: &str = "experiment,condition,presentation,rule,seed,accuracy,mean_ce,channel_uses";

/// The swept variable a row belongs to, with a numeric sort order that
/// string labels alone could not provide.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    /// Channel quality in dB.
    Snr(f64),
    /// Knowledge-base size.
    Knowledge(usize),
    /// Attention capacity and which weights survive it.
    Capacity { mode: StressMode, kept: usize },
    /// Alternating-training round (0 = before any alternation).
    Alternation(usize),
    /// Anything else, ordered by label.
    Named(String),
}

impl Condition {
    pub fn label(&self) -> String {
        match self {
            Condition::Snr(db) => format!("snr_{}", fmt_db(*db)),
            Condition::Knowledge(n) => format!("knowledge_{n}"),
            Condition::Capacity { mode: StressMode::MostImportant, kept } => format!("most_{kept}"),
            Condition::Capacity { mode: StressMode::LeastImportant, kept } => {
                format!("least_{kept}")
            }
            Condition::Alternation(t) => format!("alternation_{t}"),
            Condition::Named(s) => s.clone(),
        }
    }

    /// Total order: variant first, then numeric value, then label.
    fn rank(&self) -> (u8, i64, String) {
        match self {
            Condition::Snr(db) => (0, (db * 1000.0).round() as i64, String::new()),
            Condition::Knowledge(n) => (1, *n as i64, String::new()),
            Condition::Capacity { mode, kept } => {
                let m = match mode {
                    StressMode::MostImportant => 0,
                    StressMode::LeastImportant => 1,
                };
                (2, (m as i64) << 32 | *kept as i64, String::new())
            }
            Condition::Alternation(t) => (3, *t as i64, String::new()),
            Condition::Named(s) => (4, 0, s.clone()),
        }
    }
}

/// dB values print without a trailing `.0` when integral: `snr_-10`,
/// `snr_2.5`.
fn fmt_db(db: f64) -> String {
    if db == db.trunc() {
        format!("{db:.0}")
    } else {
        format!("{db}")
    }
}

/// One measurement: a decision rule evaluated under one condition for one
/// Monte Carlo replicate.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub condition: Condition,
    pub presentation: String,
    pub rule: String,
    /// Monte Carlo replicate index.
    pub seed: u64,
    pub accuracy: f64,
    pub mean_ce: f64,
    /// Channel uses per transmitted sample (mean over the evaluation set).
    pub channel_uses: f64,
}

/// Six significant digits, plain decimal notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (5 - x.abs().log10().floor() as i64).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (&a.experiment, a.condition.rank(), &a.presentation, &a.rule, a.seed).cmp(&(
            &b.experiment,
            b.condition.rank(),
            &b.presentation,
            &b.rule,
            b.seed,
        ))
    });
}

/// Render rows as a CSV document (header, one line per row, trailing
/// newline), sorting first so emission order never depends on how the
/// rows were produced.
pub fn emit_csv(mut rows: Vec<ResultRow>) -> String {
    sort_rows(&mut rows);
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.condition.label(),
            r.presentation,
            r.rule,
            r.seed,
            fmt_sig(r.accuracy),
            fmt_sig(r.mean_ce),
            fmt_sig(r.channel_uses),
        ));
    }
    out
}

/// Write rows to `path` as CSV.
pub fn write_csv(rows: Vec<ResultRow>, path: &Path) -> Result<()> {
    fs::write(path, emit_csv(rows)).map_err(|e| Error::io(path.to_path_buf(), e))
}
