//! Span-level exact-match precision, recall and F1.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeType, Report, Span};
use crate::error::{Error, Result};

/// True-positive, false-positive and false-negative counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Precision, recall and F1 with the counts they came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl From<Counts> for Prf {
    fn from(c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Prf {
            precision,
            recall,
            f1: f1_from_pr(precision, recall),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_from_pr(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Rounds half away from zero to four decimals.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Exact `(start, end, type)` matching between two span sets of one report.
pub fn match_spans(gold: &[Span], pred: &[Span]) -> Counts {
    let gold: HashSet<_> = gold.iter().map(Span::key).collect();
    let pred: HashSet<_> = pred.iter().map(Span::key).collect();
    let tp = gold.intersection(&pred).count();
    Counts {
        tp,
        fp: pred.len() - tp,
        fn_: gold.len() - tp,
    }
}

/// Per-attribute and micro-averaged overall scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_attribute: Vec<(AttributeType, Prf)>,
    pub overall: Prf,
}

impl EvalReport {
    pub fn attribute(&self, kind: AttributeType) -> Prf {
        self.per_attribute
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, p)| *p)
            .expect("every attribute is scored")
    }

    /// Plain-text table: one row per attribute plus `ALL`.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, Prf)> = self
            .per_attribute
            .iter()
            .map(|(k, p)| (k.to_string(), *p))
            .collect();
        rows.push(("ALL".into(), self.overall));
        render_table("attribute", &rows)
    }
}

/// Renders `name | precision | recall | f1` rows, values to four decimals.
pub fn render_table(header: &str, rows: &[(String, Prf)]) -> String {
    let width = rows
        .iter()
        .map(|(n, _)| n.chars().count())
        .chain([header.len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{header:<width$}  precision  recall  f1");
    for (name, p) in rows {
        let _ = writeln!(
            out,
            "{name:<width$}  {:.4}     {:.4}  {:.4}",
            round4(p.precision),
            round4(p.recall),
            round4(p.f1),
            width = width + name.len() - name.chars().count()
        );
    }
    out
}

/// Scores predictions against gold reports matched by id. Gold reports
/// without a prediction count all their spans as misses.
pub fn evaluate(gold: &[Report], predictions: &[Report]) -> Result<EvalReport> {
    let by_id: HashMap<&str, &Report> = gold.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut predicted: HashMap<&str, &[Span]> = HashMap::new();
    for p in predictions {
        if !by_id.contains_key(p.id.as_str()) {
            return Err(Error::UnknownReport(p.id.clone()));
        }
        predicted.insert(p.id.as_str(), &p.gold_spans);
    }
    let mut counts = [Counts::default(); 3];
    for g in gold {
        let pred = predicted.get(g.id.as_str()).copied().unwrap_or(&[]);
        for kind in AttributeType::ALL {
            let gs: Vec<Span> = g.gold_spans.iter().filter(|s| s.kind == kind).cloned().collect();
            let ps: Vec<Span> = pred.iter().filter(|s| s.kind == kind).cloned().collect();
            counts[kind.index()] += match_spans(&gs, &ps);
        }
    }
    let mut total = Counts::default();
    for c in counts {
        total += c;
    }
    Ok(EvalReport {
        per_attribute: AttributeType::ALL
            .into_iter()
            .map(|k| (k, Prf::from(counts[k.index()])))
            .collect(),
        overall: Prf::from(total),
    })
}
