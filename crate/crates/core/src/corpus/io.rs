use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{validate_spans, AttributeType, Report, Span};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct SpanRecord {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    kind: AttributeType,
}

#[derive(Serialize, Deserialize)]
struct ReportRecord {
    id: String,
    text: String,
    #[serde(default)]
    spans: Vec<SpanRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    impression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    findings_first: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kept: Option<bool>,
}

impl From<&Report> for ReportRecord {
    fn from(r: &Report) -> Self {
        let preprocessed = r.kept.is_some();
        ReportRecord {
            id: r.id.clone(),
            text: r.text.clone(),
            spans: r
                .gold_spans
                .iter()
                .map(|s| SpanRecord {
                    start: s.start,
                    end: s.end,
                    kind: s.kind,
                })
                .collect(),
            impression: preprocessed.then(|| r.impression.clone()),
            findings_first: preprocessed.then(|| r.findings_first.clone()),
            kept: r.kept,
        }
    }
}

fn into_report(rec: ReportRecord) -> std::result::Result<Report, String> {
    let chars: Vec<char> = rec.text.chars().collect();
    let spans: Vec<Span> = rec
        .spans
        .iter()
        .map(|s| Span::new(s.start, s.end, s.kind))
        .collect();
    validate_spans(&spans, chars.len()).map_err(|e| e.to_string())?;
    for (name, section) in [
        ("impression", &rec.impression),
        ("findings_first", &rec.findings_first),
    ] {
        if let Some(s) = section {
            if !rec.text.contains(s.as_str()) {
                return Err(format!("{name} is not a substring of text"));
            }
        }
    }
    let mut report = Report::new(rec.id, rec.text);
    report.impression = rec.impression.unwrap_or_default();
    report.findings_first = rec.findings_first.unwrap_or_default();
    report.kept = rec.kept;
    Ok(report.with_spans(spans))
}

/// Serializes reports as JSON lines, each terminated by `\n`.
pub fn to_jsonl_string(reports: &[Report]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(&ReportRecord::from(r))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl(reports: &[Report], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_jsonl_string(reports)?)?;
    Ok(())
}

/// Parses JSONL content; `origin` names the source in error messages.
/// Blank lines are skipped.
pub fn read_jsonl_str(content: &str, origin: &Path) -> Result<Vec<Report>> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let mut reports = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: ReportRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        reports.push(into_report(rec).map_err(parse_err)?);
    }
    Ok(reports)
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<Report>> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let content = fs::read_to_string(&path)?;
    read_jsonl_str(&content, &path)
}
