//! Result persistence: one JSON line per trial, appended and synced as soon
//! as the trial finishes, plus derived summaries.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use higsfa::eval::{summarize, GridPoint, SummaryRow, TrialResult};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUN_FILE: &str = "run.json";
pub const SUMMARY_HEADER: &str = "task,challenge,alphabets,chars,samples_per_class,n,mean_acc,sem";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub point: GridPoint,
    pub trial: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub trials: Vec<TrialResult>,
    pub summary: Vec<SummaryRow>,
    /// Trials run in this invocation; resumed ones are absent.
    pub timings: Vec<TrialTiming>,
    pub total_seconds: f64,
}

pub fn append_trials(dir: &Path, results: &[TrialResult]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = String::new();
    for r in results {
        text.push_str(&serde_json::to_string(r).map_err(|e| BenchError::Report(e.to_string()))?);
        text.push('\n');
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(TRIALS_FILE))?;
    f.write_all(text.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

/// Parse a trials file. A final line cut short by a crash is dropped.
pub fn read_trials(path: &Path) -> Result<Vec<TrialResult>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if !complete && i + 1 == lines.len() => {}
            Err(e) => {
                return Err(BenchError::Record {
                    path: path.to_path_buf(),
                    msg: format!("line {}: {e}", i + 1),
                })
            }
        }
    }
    Ok(out)
}

pub fn completed(results: &[TrialResult]) -> BTreeSet<(GridPoint, usize)> {
    results.iter().map(|r| (r.point.clone(), r.trial)).collect()
}

fn opt(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.point;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6}",
            p.task,
            opt(p.challenge.map(|c| c as usize)),
            opt(p.alphabets),
            opt(p.chars),
            p.samples_per_class,
            r.n,
            r.mean,
            r.sem
        );
    }
    out
}

/// One table per task, accuracies in percent.
pub fn summary_markdown(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mnist: Vec<&SummaryRow> = rows.iter().filter(|r| r.point.task == "mnist").collect();
    if !mnist.is_empty() {
        out.push_str("| samples/class | accuracy (%) | SEM | n |\n|---:|---:|---:|---:|\n");
        for r in mnist {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {}{} |",
                r.point.samples_per_class,
                100.0 * r.mean,
                100.0 * r.sem,
                r.n,
                if r.single_trial() { " (single trial)" } else { "" }
            );
        }
    }
    let omni: Vec<&SummaryRow> = rows.iter().filter(|r| r.point.task == "omniglot").collect();
    if !omni.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(
            "| challenge | alphabets | chars | samples/char | accuracy (%) | SEM | n |\n\
             |---:|---:|---:|---:|---:|---:|---:|\n",
        );
        for r in omni {
            let p = &r.point;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.3} | {:.3} | {}{} |",
                opt(p.challenge.map(|c| c as usize)),
                opt(p.alphabets),
                opt(p.chars),
                p.samples_per_class,
                100.0 * r.mean,
                100.0 * r.sem,
                r.n,
                if r.single_trial() { " (single trial)" } else { "" }
            );
        }
    }
    out
}

pub fn write_summary(dir: &Path, results: &[TrialResult]) -> Result<Vec<SummaryRow>> {
    let rows = summarize(results);
    std::fs::write(dir.join(SUMMARY_FILE), summary_csv(&rows))?;
    Ok(rows)
}

pub fn write_run_record(dir: &Path, record: &RunRecord) -> Result<()> {
    let text = serde_json::to_string_pretty(record).map_err(|e| BenchError::Report(e.to_string()))?;
    std::fs::write(dir.join(RUN_FILE), text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format '{other}' (csv or md)")),
        }
    }
}

fn find_trial_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            find_trial_files(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == TRIALS_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

/// Summarize every trials file below `dir`, pooling trials of the same grid
/// point across runs. Writes `report.csv` or `report.md` into `dir` and
/// returns the text.
pub fn report(dir: &Path, format: ReportFormat) -> Result<String> {
    if !dir.is_dir() {
        return Err(BenchError::Report(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    find_trial_files(dir, &mut files)?;
    let mut results = Vec::new();
    for f in &files {
        results.extend(read_trials(f)?);
    }
    if results.is_empty() {
        return Err(BenchError::Report(format!(
            "no trial records below {}",
            dir.display()
        )));
    }
    let rows = summarize(&results);
    let (text, name) = match format {
        ReportFormat::Csv => (summary_csv(&rows), "report.csv"),
        ReportFormat::Markdown => (summary_markdown(&rows), "report.md"),
    };
    std::fs::write(dir.join(name), &text)?;
    Ok(text)
}
