//! Per-run result records and the accuracy summary table built from them:
//! one row per sequence, one column per (mode, algorithm), cells averaged over
//! successful runs and annotated with failure counts.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{average_over_successes, Metric, RunResult, RunStatus};
use crate::perfcluster::RunRow;

pub const REFERENCE_CELLS_CSV: &str = include_str!("../data/reference_cells.csv");
pub const REFERENCE_RUNS_CSV: &str = include_str!("../data/reference_runs.csv");
pub const REFERENCE_OBSERVATIONS_CSV: &str = include_str!("../data/reference_observations.csv");

/// Loss rate given to a failed run in a cell where other runs succeeded.
pub const PARTIAL_FAILURE_LOSS: f64 = 0.5;
/// Loss rate given to a failed run in a cell where every run failed.
pub const TOTAL_FAILURE_LOSS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    Record { line: u64, message: String },
    #[error("line {0}: successful run has no metric value")]
    MissingValue(u64),
    #[error("no run records")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "slo-mo")]
    SloMo,
    #[serde(rename = "normal")]
    Normal,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SloMo => "slo-mo",
            Mode::Normal => "normal",
        }
    }

    /// Runs per sequence and algorithm in the reference experiments.
    pub fn reference_runs(self) -> u32 {
        match self {
            Mode::SloMo => 1,
            Mode::Normal => 5,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slo-mo" | "slomo" => Ok(Mode::SloMo),
            "normal" => Ok(Mode::Normal),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

/// One evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sequence: String,
    pub algorithm: String,
    pub mode: Mode,
    pub run_id: u32,
    pub metric: Metric,
    pub value: Option<f64>,
    pub loss_rate: f64,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn to_result(&self) -> RunResult {
        let (rmse_m, rpe_mps) = match self.metric {
            Metric::Rmse => (self.value, None),
            Metric::Rpe => (None, self.value),
        };
        RunResult {
            rmse_m,
            rpe_mps,
            loss_rate: self.loss_rate,
            status: self.status,
            n_matched: 0,
        }
    }
}

fn line_of(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

pub fn parse_records(csv_text: &str) -> Result<Vec<RunRecord>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.deserialize() {
        let rec: RunRecord = rec.map_err(|e| ReportError::Record {
            line: line_of(&e),
            message: e.to_string(),
        })?;
        if rec.status == RunStatus::Success && rec.value.is_none() {
            return Err(ReportError::MissingValue(out.len() as u64 + 2));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// A published table cell: the averaged value (absent when every run failed)
/// and the number of failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCell {
    pub metric: Metric,
    pub sequence: String,
    pub mode: Mode,
    pub algorithm: String,
    pub value: Option<f64>,
    pub failures: u32,
}

pub fn parse_cells(csv_text: &str) -> Result<Vec<ReferenceCell>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| ReportError::Record {
                line: line_of(&e),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Expands published cells into individual runs. Successful runs carry the
/// cell value; the last `failures` run ids fail with no value.
pub fn expand_cells(cells: &[ReferenceCell]) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for cell in cells {
        let runs = cell.mode.reference_runs();
        let failures = cell.failures.min(runs);
        let fail_loss = if failures == runs {
            TOTAL_FAILURE_LOSS
        } else {
            PARTIAL_FAILURE_LOSS
        };
        for run_id in 1..=runs {
            let failed = run_id > runs - failures;
            out.push(RunRecord {
                sequence: cell.sequence.clone(),
                algorithm: cell.algorithm.clone(),
                mode: cell.mode,
                run_id,
                metric: cell.metric,
                value: if failed { None } else { cell.value },
                loss_rate: if failed { fail_loss } else { 0.0 },
                status: if failed { RunStatus::Failure } else { RunStatus::Success },
            });
        }
    }
    out
}

/// Observation rows (one per run) for the records of one mode.
pub fn observation_rows(records: &[RunRecord], mode: Mode) -> Vec<RunRow> {
    records
        .iter()
        .filter(|r| r.mode == mode)
        .map(|r| RunRow {
            sequence: r.sequence.clone(),
            algorithm: r.algorithm.clone(),
            run_id: r.run_id,
            loss_rate: r.loss_rate,
            raw_err: r.value,
        })
        .collect()
}

pub fn bundled_cells() -> Vec<ReferenceCell> {
    parse_cells(REFERENCE_CELLS_CSV).expect("bundled cell table is valid")
}

pub fn bundled_runs() -> Vec<RunRecord> {
    parse_records(REFERENCE_RUNS_CSV).expect("bundled run table is valid")
}

/// The normal-speed runs of the bundled table as observation rows.
pub fn bundled_observations() -> Vec<RunRow> {
    crate::perfcluster::parse_runs(REFERENCE_OBSERVATIONS_CSV).expect("bundled observations are valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Column {
    pub mode: Mode,
    pub algorithm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    /// Mean over successful runs; `None` when every run failed.
    pub value: Option<f64>,
    pub failures: usize,
    pub runs: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub sequence: String,
    /// One entry per column; `None` when no run exists for that column.
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section {
    pub metric: Metric,
    pub rows: Vec<ReportRow>,
    /// Mean of the non-dash cells per column.
    pub averages: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub columns: Vec<Column>,
    pub sections: Vec<Section>,
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

/// Marks the lowest value among non-failed cells of each mode group
/// (first column wins ties).
fn mark_best(cells: &mut [Option<Cell>], columns: &[Column]) {
    let mut modes = Vec::new();
    for c in columns {
        push_unique(&mut modes, c.mode);
    }
    for mode in modes {
        let best = cells
            .iter()
            .enumerate()
            .filter(|(i, _)| columns[*i].mode == mode)
            .filter_map(|(i, c)| c.as_ref().and_then(|c| c.value).map(|v| (i, v)))
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 <= x.1 => Some(a),
                _ => Some(x),
            });
        if let Some((i, _)) = best {
            cells[i].as_mut().expect("cell exists").best = true;
        }
    }
}

impl ReportTable {
    /// Groups records by metric, sequence and column in order of first
    /// appearance.
    pub fn build(records: &[RunRecord]) -> Result<Self, ReportError> {
        if records.is_empty() {
            return Err(ReportError::Empty);
        }
        let mut columns = Vec::new();
        let mut metrics = Vec::new();
        for r in records {
            push_unique(&mut metrics, r.metric);
        }
        for mode in [Mode::SloMo, Mode::Normal] {
            for r in records.iter().filter(|r| r.mode == mode) {
                push_unique(
                    &mut columns,
                    Column {
                        mode,
                        algorithm: r.algorithm.clone(),
                    },
                );
            }
        }

        let sections = metrics
            .into_iter()
            .map(|metric| {
                let mut sequences = Vec::new();
                for r in records.iter().filter(|r| r.metric == metric) {
                    push_unique(&mut sequences, r.sequence.clone());
                }
                let rows: Vec<ReportRow> = sequences
                    .into_iter()
                    .map(|sequence| {
                        let mut cells: Vec<Option<Cell>> = columns
                            .iter()
                            .map(|col| {
                                let runs: Vec<RunResult> = records
                                    .iter()
                                    .filter(|r| {
                                        r.metric == metric
                                            && r.sequence == sequence
                                            && r.mode == col.mode
                                            && r.algorithm == col.algorithm
                                    })
                                    .map(RunRecord::to_result)
                                    .collect();
                                (!runs.is_empty()).then(|| Cell {
                                    value: average_over_successes(&runs, metric).ok(),
                                    failures: runs.iter().filter(|r| !r.is_success()).count(),
                                    runs: runs.len(),
                                    best: false,
                                })
                            })
                            .collect();
                        mark_best(&mut cells, &columns);
                        ReportRow { sequence, cells }
                    })
                    .collect();
                let averages = (0..columns.len())
                    .map(|c| {
                        let vals: Vec<f64> = rows
                            .iter()
                            .filter_map(|r| r.cells[c].as_ref().and_then(|cell| cell.value))
                            .collect();
                        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                    })
                    .collect();
                Section {
                    metric,
                    rows,
                    averages,
                }
            })
            .collect();
        Ok(Self { columns, sections })
    }

    pub fn average(&self, metric: Metric, mode: Mode, algorithm: &str) -> Option<f64> {
        let col = self
            .columns
            .iter()
            .position(|c| c.mode == mode && c.algorithm == algorithm)?;
        self.sections
            .iter()
            .find(|s| s.metric == metric)
            .and_then(|s| s.averages[col])
    }

    pub fn cell(&self, metric: Metric, sequence: &str, mode: Mode, algorithm: &str) -> Option<&Cell> {
        let col = self
            .columns
            .iter()
            .position(|c| c.mode == mode && c.algorithm == algorithm)?;
        self.sections
            .iter()
            .find(|s| s.metric == metric)?
            .rows
            .iter()
            .find(|r| r.sequence == sequence)?
            .cells[col]
            .as_ref()
    }

    /// Plain-text rendering. Values use `1.25e-1` notation, `*` marks the best
    /// cell of each mode group, `[f/n]` gives failed out of total runs when any
    /// run failed, and `-` stands for a cell where every run failed.
    pub fn render(&self) -> String {
        let mut header = vec!["metric".to_string(), "sequence".to_string()];
        header.extend(self.columns.iter().map(|c| format!("{} {}", c.mode, c.algorithm)));
        let mut lines = vec![header];
        for s in &self.sections {
            for r in &s.rows {
                let mut line = vec![s.metric.to_string(), r.sequence.clone()];
                line.extend(r.cells.iter().map(render_cell));
                lines.push(line);
            }
            let mut line = vec![s.metric.to_string(), "Average".to_string()];
            line.extend(s.averages.iter().map(|a| match a {
                Some(v) => format!("{v:.2}"),
                None => "-".to_string(),
            }));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &lines {
            let padded: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect();
            writeln!(out, "{}", padded.join("  ").trim_end()).expect("string write");
        }
        out
    }
}

fn render_cell(cell: &Option<Cell>) -> String {
    let Some(c) = cell else {
        return String::new();
    };
    let Some(v) = c.value else {
        return "-".to_string();
    };
    let mut s = format!("{v:.2e}");
    if c.best {
        s.insert(0, '*');
    }
    if c.failures > 0 {
        write!(s, " [{}/{}]", c.failures, c.runs).expect("string write");
    }
    s
}
