//! Training-scale checks: capacity, the end-to-end synthetic run and
//! determinism of the library pipeline.

use std::fs;
use std::path::Path;
use std::time::Instant;

use oncoie::corpus::{generate_corpus, read_jsonl, write_jsonl, Report, SplitConfig, SyntheticSpec, DEFAULT_KEYWORDS};
use oncoie::ensemble::{best_threshold, sweep_thresholds, vote_reports, VoteConfig};
use oncoie::eval::evaluate;
use oncoie::taggers::{
    build_tagger, build_vocab, load_model, save_model, token_accuracy, train_split, Architecture,
    Tagger, TaggerConfig, TrainConfig,
};

use super::kept_corpus;

/// Tagger config used by the training-scale checks. Attention runs at
/// reduced width so the whole suite fits a single core.
pub fn tagger_config(arch: Architecture, seed: u64) -> TaggerConfig {
    let mut cfg = TaggerConfig::new(arch, seed);
    cfg.encoder.attention_dim = 64;
    cfg.encoder.attention_heads = 4;
    cfg
}

fn fit(arch: Architecture, train: &[Report], dev: &[Report], tc: &TrainConfig, min_freq: usize) -> Result<(Tagger, usize), String> {
    let cfg = tagger_config(arch, tc.seed);
    let vocab = build_vocab(train, min_freq, &[]);
    let model = build_tagger(&cfg, vocab).map_err(|e| e.to_string())?;
    let (model, history) = train_split(model, train, dev, tc).map_err(|e| e.to_string())?;
    Ok((model, history.epochs.len()))
}

/// Criterion 6: every architecture memorises ten reports.
pub fn capacity_suite() -> Result<String, String> {
    let started = Instant::now();
    let subset: Vec<Report> = kept_corpus(6, 12).into_iter().take(10).collect();
    let tc = TrainConfig {
        learning_rate: 0.01,
        batch_size: 2,
        max_epochs: 300,
        patience: 300,
        seed: 6,
        target_dev_f1: Some(1.0),
        ..Default::default()
    };
    let mut details = Vec::new();
    let mut failures = Vec::new();
    for arch in Architecture::ALL {
        let (model, epochs) = fit(arch, &subset, &subset, &tc, 1)?;
        let acc = token_accuracy(&model, &subset).map_err(|e| e.to_string())?;
        let (again, _) = fit(arch, &subset, &subset, &tc, 1)?;
        let same = again.store() == model.store();
        details.push(format!("{arch} {acc:.3}@{epochs}"));
        if acc < 0.99 || !same {
            failures.push(format!("{arch}: accuracy {acc:.4} after {epochs} epochs, rerun identical {same}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 300.0 {
        failures.push(format!("took {secs:.0}s"));
    }
    let summary = format!("{}; {secs:.0}s", details.join(", "));
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{} [{summary}]", failures.join("; ")))
    }
}

/// First `n` kept reports of a synthetic corpus.
pub fn kept_reports(seed: u64, n: usize) -> Vec<Report> {
    let mut size = n + n / 4 + 10;
    loop {
        let kept = kept_corpus(seed, size);
        if kept.len() >= n {
            return kept.into_iter().take(n).collect();
        }
        size *= 2;
    }
}

/// Criterion 7: 800/100/100 synthetic run of all eight taggers and the vote.
pub fn end_to_end_suite() -> Result<String, String> {
    let started = Instant::now();
    let data = kept_reports(7, 1000);
    let (train, rest) = data.split_at(800);
    let (dev, test) = rest.split_at(100);
    let tc = TrainConfig {
        max_epochs: 15,
        patience: 3,
        seed: 7,
        ..Default::default()
    };
    let mut dev_preds = Vec::new();
    let mut test_preds = Vec::new();
    let mut singles = Vec::new();
    for arch in Architecture::ALL {
        let (model, epochs) = fit(arch, train, dev, &tc, 2)?;
        let d: Vec<Report> = dev.iter().map(|r| model.predict_report(r)).collect();
        let t: Vec<Report> = test.iter().map(|r| model.predict_report(r)).collect();
        let f1 = evaluate(test, &t).map_err(|e| e.to_string())?.overall.f1;
        log::info!("{arch}: test f1 {f1:.4} after {epochs} epochs");
        singles.push((arch, f1));
        dev_preds.push(d);
        test_preds.push(t);
    }
    let sweep = sweep_thresholds(&dev_preds, dev).map_err(|e| e.to_string())?;
    let k = best_threshold(&sweep).ok_or("empty sweep")?;
    let fused = vote_reports(&test_preds, &VoteConfig::with_threshold(k)).map_err(|e| e.to_string())?;
    let vote_f1 = evaluate(test, &fused).map_err(|e| e.to_string())?.overall.f1;
    let mut sorted: Vec<f64> = singles.iter().map(|(_, f)| *f).collect();
    sorted.sort_by(f64::total_cmp);
    let median = (sorted[3] + sorted[4]) / 2.0;
    let lstm_crf = singles.iter().find(|(a, _)| *a == Architecture::LstmCrf).unwrap().1;
    let secs = started.elapsed().as_secs_f64();
    let per_model: Vec<String> = singles.iter().map(|(a, f)| format!("{a} {f:.3}")).collect();
    let detail = format!(
        "{}; vote@{k} {vote_f1:.4} vs median {median:.4}; {secs:.0}s",
        per_model.join(", ")
    );
    if lstm_crf >= 0.95 && vote_f1 >= median && secs < 1800.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Runs generate, preprocess, train, predict, vote and evaluate into `dir`.
pub fn run_pipeline(dir: &Path, seed: u64) -> Result<(), String> {
    let e = |x: oncoie::Error| x.to_string();
    fs::create_dir_all(dir).map_err(|x| x.to_string())?;
    let raw = generate_corpus(&SyntheticSpec::new(seed, 60)).map_err(e)?;
    write_jsonl(&raw, &dir.join("corpus.jsonl")).map_err(e)?;
    let split = SplitConfig::default();
    let kept: Vec<Report> = read_jsonl(&dir.join("corpus.jsonl"))
        .map_err(e)?
        .into_iter()
        .filter_map(|mut r| r.preprocess(&DEFAULT_KEYWORDS, &split).then_some(r))
        .collect();
    write_jsonl(&kept, &dir.join("kept.jsonl")).map_err(e)?;
    let (train, test) = kept.split_at(kept.len() - 10);
    let tc = TrainConfig {
        max_epochs: 3,
        seed,
        ..Default::default()
    };
    let mut preds = Vec::new();
    for arch in [Architecture::Crf, Architecture::CnnCrf, Architecture::RegressiveWavenet] {
        let (model, _) = fit(arch, train, &[], &tc, 2)?;
        let model_dir = dir.join(arch.name());
        save_model(&model, &model_dir).map_err(e)?;
        let p: Vec<Report> = test.iter().map(|r| model.predict_report(r)).collect();
        write_jsonl(&p, &dir.join(format!("{arch}.pred.jsonl"))).map_err(e)?;
        preds.push(p);
    }
    let fused = vote_reports(&preds, &VoteConfig::default()).map_err(e)?;
    write_jsonl(&fused, &dir.join("fused.jsonl")).map_err(e)?;
    let report = evaluate(test, &fused).map_err(e)?;
    fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&report).map_err(|x| x.to_string())?)
        .map_err(|x| x.to_string())?;
    Ok(())
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Criterion 9: byte-identical reruns and lossless model round trips.
pub fn determinism_suite() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|x| x.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&a, 99)?;
    run_pipeline(&b, 99)?;
    let (fa, fb) = (files(&a), files(&b));
    if fa.len() != fb.len() {
        return Err(format!("{} files vs {}", fa.len(), fb.len()));
    }
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        if na != nb || ca != cb {
            return Err(format!("{na} differs between reruns"));
        }
    }

    let reports = kept_reports(99, 20);
    for arch in Architecture::ALL {
        let tc = TrainConfig {
            max_epochs: 1,
            seed: 3,
            ..Default::default()
        };
        let (model, _) = fit(arch, &reports, &[], &tc, 1)?;
        let dir = tmp.path().join(format!("rt-{arch}"));
        save_model(&model, &dir).map_err(|x| x.to_string())?;
        let loaded = load_model(&dir).map_err(|x| x.to_string())?;
        if loaded.store() != model.store() {
            return Err(format!("{arch}: parameters changed across save/load"));
        }
        for r in &reports {
            if loaded.predict_spans(r) != model.predict_spans(r) {
                return Err(format!("{arch}: prediction for {} changed after load", r.id));
            }
        }
    }
    Ok(format!("{} output files identical; 8 models round-trip on 20 reports", fa.len()))
}
