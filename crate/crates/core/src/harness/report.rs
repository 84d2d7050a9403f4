use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{
    average_success_rate, bootstrap_ci, generation_quality, MetricsError, RunRecord,
};
use super::{HarnessError, RunOutput, BOOTSTRAP_RESAMPLES, CI_LEVEL};
use crate::llm::TaskKind;

/// One configuration's aggregate: a sweep point or a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: TaskKind,
    pub method: String,
    pub generator: String,
    pub discriminator: String,
    pub accuracy: Option<f64>,
    pub n_tasks: usize,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_half_width: f64,
    pub quality_overall: f64,
    #[serde(skip)]
    pub quality_per_depth: Vec<f64>,
}

fn group_key(r: &RunRecord) -> (TaskKind, &str, &str, &str, Option<u64>) {
    (
        r.task,
        r.method.as_str(),
        r.generator.as_str(),
        r.discriminator.as_str(),
        r.accuracy.map(f64::to_bits),
    )
}

/// Groups records by configuration, in order of first appearance.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>, MetricsError> {
    let mut groups: Vec<Vec<RunRecord>> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|g| group_key(&g[0]) == group_key(r)) {
            Some(g) => g.push(r.clone()),
            None => groups.push(vec![r.clone()]),
        }
    }
    groups
        .iter()
        .map(|g| {
            let success_rate = average_success_rate(g)?;
            let ratios: Vec<f64> = g.iter().map(RunRecord::success_ratio).collect();
            let (ci_low, ci_high) = bootstrap_ci(&ratios, BOOTSTRAP_RESAMPLES, CI_LEVEL, 0);
            let quality = generation_quality(g);
            let head = &g[0];
            Ok(SummaryRow {
                task: head.task,
                method: head.method.clone(),
                generator: head.generator.clone(),
                discriminator: head.discriminator.clone(),
                accuracy: head.accuracy,
                n_tasks: g.len(),
                success_rate,
                ci_low,
                ci_high,
                ci_half_width: (ci_high - ci_low) / 2.0,
                quality_overall: quality.overall,
                quality_per_depth: quality.per_depth,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct TaskRow<'a> {
    task_id: &'a str,
    method: &'a str,
    generator: &'a str,
    discriminator: &'a str,
    accuracy: Option<f64>,
    n_outputs: usize,
    n_correct: usize,
    success_rate: f64,
}

#[derive(Serialize)]
struct QualityRow<'a> {
    method: &'a str,
    generator: &'a str,
    discriminator: &'a str,
    accuracy: Option<f64>,
    depth: usize,
    quality: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub sweep: PathBuf,
    pub quality: PathBuf,
    pub traces: PathBuf,
    pub records: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ReportFiles {
            summary: dir.join("summary.csv"),
            sweep: dir.join("sweep.csv"),
            quality: dir.join("quality.csv"),
            traces: dir.join("traces.jsonl"),
            records: dir.join("records.jsonl"),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv<T: Serialize>(
    path: &Path,
    rows: impl IntoIterator<Item = T>,
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for line in lines {
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the per-task table, the per-configuration table, generation
/// quality by depth, full traces, and the raw records. Only `records.jsonl`
/// carries wall-clock times, so the other files are identical across
/// reruns with the same seeds.
pub fn emit_report(dir: &Path, output: &RunOutput) -> Result<ReportFiles, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = ReportFiles::in_dir(dir);
    write_csv(
        &files.summary,
        output.records.iter().map(|r| TaskRow {
            task_id: &r.task_id,
            method: &r.method,
            generator: &r.generator,
            discriminator: &r.discriminator,
            accuracy: r.accuracy,
            n_outputs: r.n_outputs,
            n_correct: r.n_correct,
            success_rate: r.success_ratio(),
        }),
    )?;
    let rows = if output.records.is_empty() {
        Vec::new()
    } else {
        summarize(&output.records)?
    };
    write_csv(&files.sweep, &rows)?;
    write_csv(
        &files.quality,
        rows.iter().flat_map(|row| {
            row.quality_per_depth
                .iter()
                .enumerate()
                .map(move |(d, &q)| QualityRow {
                    method: &row.method,
                    generator: &row.generator,
                    discriminator: &row.discriminator,
                    accuracy: row.accuracy,
                    depth: d + 1,
                    quality: q,
                })
        }),
    )?;
    write_lines(
        &files.traces,
        output.outcomes.iter().map(|o| o.to_json_line()),
    )?;
    write_lines(
        &files.records,
        output
            .records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes")),
    )?;
    Ok(files)
}

/// Reads `records.jsonl` back from a report directory.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let path = ReportFiles::in_dir(dir).records;
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| HarnessError::Parse {
                path: path.clone(),
                message: format!("line {}: {e}", i + 1),
            })?,
        );
    }
    Ok(out)
}
