//! Exact-match span voting across several taggers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeType, Report, Span};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Prf};

/// Minimum votes a candidate needs; `None` means majority `⌈N/2⌉`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteConfig {
    pub threshold: Option<usize>,
}

impl VoteConfig {
    pub fn with_threshold(threshold: usize) -> Self {
        VoteConfig {
            threshold: Some(threshold),
        }
    }

    pub fn resolve(&self, n_models: usize) -> Result<usize> {
        let t = self.threshold.unwrap_or(n_models.div_ceil(2));
        if t == 0 || t > n_models {
            return Err(Error::InvalidInput(format!(
                "vote threshold {t} outside 1..={n_models}"
            )));
        }
        Ok(t)
    }
}

type Key = (usize, usize, AttributeType);

/// Vote count per distinct `(start, end, type)` candidate, in key order.
pub fn count_votes(predictions: &[Vec<Span>]) -> BTreeMap<Key, (usize, Span)> {
    let mut votes: BTreeMap<Key, (usize, Span)> = BTreeMap::new();
    for model in predictions {
        let mut seen: Vec<Key> = model.iter().map(Span::key).collect();
        seen.sort();
        seen.dedup();
        for key in seen {
            let span = model.iter().find(|s| s.key() == key).unwrap().clone();
            votes.entry(key).or_insert((0, span)).0 += 1;
        }
    }
    votes
}

/// Candidates reaching `threshold` votes, before overlap resolution.
pub fn candidates(predictions: &[Vec<Span>], threshold: usize) -> Vec<(Span, usize)> {
    count_votes(predictions)
        .into_values()
        .filter(|(v, _)| *v >= threshold)
        .map(|(v, s)| (s, v))
        .collect()
}

/// Greedy non-overlapping selection: most votes first, then longer spans,
/// then earlier starts (then type order). Output is sorted by start.
pub fn resolve_overlaps(mut candidates: Vec<(Span, usize)>) -> Vec<Span> {
    candidates.sort_by(|(a, va), (b, vb)| {
        vb.cmp(va)
            .then(b.len().cmp(&a.len()))
            .then(a.start.cmp(&b.start))
            .then(a.kind.cmp(&b.kind))
    });
    let mut chosen: Vec<Span> = Vec::new();
    for (s, _) in candidates {
        if chosen.iter().all(|c| !c.overlaps(&s)) {
            chosen.push(s);
        }
    }
    chosen.sort();
    chosen
}

/// Fuses one report's predictions from `N ≥ 1` models.
pub fn vote(predictions: &[Vec<Span>], cfg: &VoteConfig) -> Result<Vec<Span>> {
    if predictions.is_empty() {
        return Err(Error::InvalidInput("vote needs at least one model".into()));
    }
    let threshold = cfg.resolve(predictions.len())?;
    Ok(resolve_overlaps(candidates(predictions, threshold)))
}

/// Votes report by report across `N` prediction sets aligned by id. Every
/// set must cover the same reports as the first.
pub fn vote_reports(models: &[Vec<Report>], cfg: &VoteConfig) -> Result<Vec<Report>> {
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidInput("vote needs at least one model".into()))?;
    let indexed: Vec<BTreeMap<&str, &Report>> = models
        .iter()
        .map(|m| m.iter().map(|r| (r.id.as_str(), r)).collect())
        .collect();
    first
        .iter()
        .map(|r| {
            let per_model = indexed
                .iter()
                .map(|m| {
                    m.get(r.id.as_str())
                        .map(|x| x.gold_spans.clone())
                        .ok_or_else(|| Error::UnknownReport(r.id.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let fused = vote(&per_model, cfg)?;
            let mut out = r.clone();
            out.gold_spans = fused;
            Ok(out)
        })
        .collect()
}

/// Scores the fused output at every threshold `1..=N` against `gold`.
pub fn sweep_thresholds(models: &[Vec<Report>], gold: &[Report]) -> Result<Vec<(usize, Prf)>> {
    (1..=models.len())
        .map(|t| {
            let fused = vote_reports(models, &VoteConfig::with_threshold(t))?;
            Ok((t, evaluate(gold, &fused)?.overall))
        })
        .collect()
}

/// Threshold with the best F1 in a sweep over `1..=N`. When several tie,
/// the one nearest the majority default `⌈N/2⌉` wins, then the smaller:
/// a sweep that cannot tell thresholds apart leaves the default in place.
pub fn best_threshold(sweep: &[(usize, Prf)]) -> Option<usize> {
    let majority = sweep.len().div_ceil(2);
    let best_f1 = sweep.iter().map(|(_, p)| p.f1).fold(f64::NEG_INFINITY, f64::max);
    sweep
        .iter()
        .filter(|(_, p)| p.f1 == best_f1)
        .map(|&(t, _)| t)
        .min_by_key(|&t| (t.abs_diff(majority), t))
}
