use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::SweepTable;
use super::RunError;
use crate::eval::{reports_to_csv, reports_to_json, reports_to_markdown, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "markdown",
        })
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format `{s}` (expected csv, json or markdown)")),
        }
    }
}

fn write_all(dir: &Path, stem: &str, files: Vec<(Format, String)>) -> Result<Vec<PathBuf>, RunError> {
    let err = |path: &Path, e: std::io::Error| RunError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
    let mut written = Vec::new();
    for (format, contents) in files {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        std::fs::write(&path, contents).map_err(|e| err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `<stem>.<ext>` in `dir` for each format. Contents depend only on
/// the reports, so identical runs produce identical files.
pub fn emit_reports(
    reports: &[EvalReport],
    title: &str,
    dir: &Path,
    stem: &str,
    formats: &[Format],
) -> Result<Vec<PathBuf>, RunError> {
    if reports.is_empty() {
        return Err(RunError::Config("no reports to write".into()));
    }
    let files = formats
        .iter()
        .map(|&f| {
            let body = match f {
                Format::Csv => reports_to_csv(reports),
                Format::Json => reports_to_json(reports),
                Format::Markdown => reports_to_markdown(title, reports),
            };
            (f, body)
        })
        .collect();
    write_all(dir, stem, files)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_to_csv(table: &SweepTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scale",
        "mixed",
        "train_rmse",
        "test_rmse",
        "train_corr",
        "test_corr",
        "lambda",
        "note",
        "fingerprint",
    ])
    .expect("in-memory write");
    for row in &table.rows {
        let r = &row.report;
        w.write_record([
            row.scale.clone(),
            row.mixed.to_string(),
            r.train_rmse.to_string(),
            r.test_rmse.to_string(),
            opt(r.train_corr),
            opt(r.test_corr),
            opt(r.lambda),
            r.note.clone().unwrap_or_default(),
            r.fingerprint.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 input")
}

pub fn sweep_to_markdown(table: &SweepTable) -> String {
    let f = |v: f64| format!("{v:.3}");
    let fo = |v: Option<f64>| v.map_or("-".to_string(), f);
    let mut out = format!("## Robustness to vertical scale: {}\n\n", table.spec);
    out.push_str("| Scale | RMSE Train | RMSE Test | Correlation Train | Correlation Test |\n");
    out.push_str("|---|---:|---:|---:|---:|\n");
    for row in &table.rows {
        let r = &row.report;
        let name = match &r.note {
            Some(n) => format!("{} ({n})", row.scale),
            None => row.scale.clone(),
        };
        out.push_str(&format!(
            "| {name} | {} | {} | {} | {} |\n",
            f(r.train_rmse),
            f(r.test_rmse),
            fo(r.train_corr),
            fo(r.test_corr)
        ));
    }
    out
}

pub(super) fn emit_sweep(table: &SweepTable, dir: &Path, stem: &str, formats: &[Format]) -> Result<Vec<PathBuf>, RunError> {
    let files = formats
        .iter()
        .map(|&f| {
            let body = match f {
                Format::Csv => sweep_to_csv(table),
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(table).expect("sweep serializes");
                    s.push('\n');
                    s
                }
                Format::Markdown => sweep_to_markdown(table),
            };
            (f, body)
        })
        .collect();
    write_all(dir, stem, files)
}
