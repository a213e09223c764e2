//! Reading-comprehension extraction: one fixed question per attribute,
//! start/end pointers over the passage, and rejection of low-confidence
//! answers.

use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeType, Report, Span};
use crate::encoders::{Vocab, SEP};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Prf};
use crate::graph::{Graph, Matrix, ParamId, ParamStore, Var};
use crate::taggers::{
    load_store, read_manifest, save_store, Adam, EncoderKind, EncoderParams, EpochRecord,
    FeatureStack, TrainConfig, TrainHistory,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Question {
    pub attribute: AttributeType,
    pub text: &'static str,
}

impl Question {
    pub fn for_attribute(attribute: AttributeType) -> Self {
        let text = match attribute {
            AttributeType::PrimarySite => "原发部位？",
            AttributeType::LesionSize => "原发部位的病灶大小是？",
            AttributeType::MetastasisSite => "原发部位的转移部位是？",
        };
        Question { attribute, text }
    }

    pub fn all() -> [Question; 3] {
        AttributeType::ALL.map(Question::for_attribute)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrcConfig {
    /// Minimum `p_start(s) + p_end(e)` for an answer to be kept.
    pub tau: f64,
    pub max_answer_len: usize,
    pub encoder: EncoderKind,
    pub encoder_params: EncoderParams,
    pub min_char_freq: usize,
    pub seed: u64,
}

impl Default for MrcConfig {
    fn default() -> Self {
        MrcConfig {
            tau: 1.0,
            max_answer_len: 20,
            encoder: EncoderKind::BiLstm,
            // a wider state carries the question across long passages
            encoder_params: EncoderParams {
                lstm_hidden: 64,
                ..EncoderParams::default()
            },
            min_char_freq: 2,
            seed: 0,
        }
    }
}

impl MrcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau must lie in [0, 2], got {}", self.tau)));
        }
        if self.max_answer_len == 0 {
            return Err(Error::Config("max_answer_len must be at least 1".into()));
        }
        self.encoder_params.validate(self.encoder)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnswerDecision {
    /// Half-open character range `start..end` in the passage.
    Accept { start: usize, end: usize, score: f64 },
    Reject { best_score: f64 },
}

impl AnswerDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, AnswerDecision::Accept { .. })
    }

    pub fn score(&self) -> f64 {
        match *self {
            AnswerDecision::Accept { score, .. } => score,
            AnswerDecision::Reject { best_score } => best_score,
        }
    }
}

/// Best `(s, e)` with `s ≤ e < s + max_len`, scored by probability sum.
/// Ties go to the smallest `s`, then the smallest `e`.
pub fn extract_answer(p_start: &[f64], p_end: &[f64], tau: f64, max_len: usize) -> AnswerDecision {
    let t = p_start.len().min(p_end.len());
    let mut best: Option<(usize, usize, f64)> = None;
    for s in 0..t {
        for e in s..t.min(s + max_len) {
            let score = p_start[s] + p_end[e];
            if best.is_none_or(|(_, _, b)| score > b) {
                best = Some((s, e, score));
            }
        }
    }
    match best {
        Some((s, e, score)) if score >= tau => AnswerDecision::Accept {
            start: s,
            end: e + 1,
            score,
        },
        Some((_, _, score)) => AnswerDecision::Reject { best_score: score },
        None => AnswerDecision::Reject { best_score: 0.0 },
    }
}

/// Boundary model: shared encoder over `question SEP passage` with two
/// linear pointer heads.
#[derive(Clone, Debug)]
pub struct MrcModel {
    cfg: MrcConfig,
    vocab: Vocab,
    store: ParamStore,
    features: FeatureStack,
    start_w: ParamId,
    end_w: ParamId,
}

/// One training question: input ids, passage offset and gold boundaries.
#[derive(Clone, Debug, PartialEq)]
struct MrcExample {
    ids: Vec<usize>,
    offset: usize,
    start: usize,
    end: usize,
}

/// Vocabulary over report texts that always covers the question characters.
pub fn build_mrc_vocab(reports: &[Report], min_freq: usize) -> Vocab {
    let questions: Vec<&str> = Question::all().iter().map(|q| q.text).collect();
    Vocab::build(reports.iter().map(|r| r.text.as_str()), min_freq, &questions)
}

pub fn build_mrc(cfg: &MrcConfig, vocab: Vocab) -> Result<MrcModel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let features = FeatureStack::build(cfg.encoder, &cfg.encoder_params, vocab.len(), &mut store, &mut rng)?;
    let h = features.output_dim();
    // a bias would cancel under the softmax over positions
    let start_w = store.add_uniform("start.weight", 1, h, h, &mut rng);
    let end_w = store.add_uniform("end.weight", 1, h, h, &mut rng);
    store.round_to_f32();
    Ok(MrcModel {
        cfg: cfg.clone(),
        vocab,
        store,
        features,
        start_w,
        end_w,
    })
}

impl MrcModel {
    pub fn config(&self) -> &MrcConfig {
        &self.cfg
    }

    pub fn config_mut(&mut self) -> &mut MrcConfig {
        &mut self.cfg
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn input_ids(&self, question: &Question, passage: &[char]) -> (Vec<usize>, usize) {
        let mut ids = self.vocab.encode(question.text);
        ids.push(SEP);
        let offset = ids.len();
        ids.extend(passage.iter().map(|&c| self.vocab.id(c)));
        (ids, offset)
    }

    /// Start and end logits over passage positions, each `1×T`.
    fn logits(&self, g: &mut Graph, ids: &[usize], offset: usize) -> (Var, Var) {
        let feats = self.features.forward(g, ids);
        let passage = g.slice_rows(feats, offset, ids.len() - offset);
        let ws = g.param(self.start_w);
        let we = g.param(self.end_w);
        (g.matmul_t(ws, passage), g.matmul_t(we, passage))
    }

    fn example_loss(&self, g: &mut Graph, ex: &MrcExample) -> Var {
        let (ls, le) = self.logits(g, &ex.ids, ex.offset);
        let a = g.cross_entropy(ls, &[ex.start]);
        let b = g.cross_entropy(le, &[ex.end]);
        g.add(a, b)
    }

    fn loss_and_gradient(&self, batch: &[MrcExample]) -> (f64, Vec<Matrix>) {
        let n = batch.len().max(1) as f64;
        let mut grads: Vec<Matrix> = self
            .store
            .ids()
            .map(|id| Matrix::zeros(self.store.get(id).dim()))
            .collect();
        let mut total = 0.0;
        for ex in batch {
            let mut g = Graph::new(&self.store);
            let l = self.example_loss(&mut g, ex);
            total += g.value(l)[[0, 0]];
            g.backward(l).accumulate_into(&mut grads, 1.0 / n);
        }
        (total / n, grads)
    }

    /// Training questions for a report: one per attribute with a gold span,
    /// targeting the first such span.
    fn examples(&self, report: &Report) -> Vec<MrcExample> {
        let chars = report.chars();
        let mut spans = report.gold_spans.clone();
        spans.sort();
        Question::all()
            .iter()
            .filter_map(|q| {
                let gold = spans.iter().find(|s| s.kind == q.attribute)?;
                let (ids, offset) = self.input_ids(q, &chars);
                Some(MrcExample {
                    ids,
                    offset,
                    start: gold.start,
                    end: gold.end - 1,
                })
            })
            .collect()
    }

    /// Answers every question for `report` with the configured threshold.
    pub fn predict_spans(&self, report: &Report) -> Result<Vec<Span>> {
        let chars = report.chars();
        let mut spans = Vec::new();
        for q in Question::all() {
            let (ps, pe) = mrc_forward(self, &q, &chars)?;
            let decision = extract_answer(
                ps.as_slice().expect("contiguous"),
                pe.as_slice().expect("contiguous"),
                self.cfg.tau,
                self.cfg.max_answer_len,
            );
            if let AnswerDecision::Accept { start, end, .. } = decision {
                spans.push(Span::with_text(start, end, q.attribute, &chars));
            }
        }
        spans.sort();
        Ok(spans)
    }
}

/// Start and end distributions over passage positions.
pub fn mrc_forward(model: &MrcModel, question: &Question, passage: &[char]) -> Result<(Array1<f64>, Array1<f64>)> {
    if passage.is_empty() {
        return Err(Error::InvalidInput("empty passage".into()));
    }
    let (ids, offset) = model.input_ids(question, passage);
    let mut g = Graph::new(&model.store);
    let (ls, le) = model.logits(&mut g, &ids, offset);
    let ps = g.softmax_rows(ls);
    let pe = g.softmax_rows(le);
    Ok((g.value(ps).row(0).to_owned(), g.value(pe).row(0).to_owned()))
}

/// Three questions per report; accepted answers become typed spans.
pub fn mrc_predict_report(report: &Report, model: &MrcModel) -> Result<Report> {
    let mut out = report.clone();
    out.gold_spans = model.predict_spans(report)?;
    Ok(out)
}

/// Start and end distributions for every question of every report, so
/// threshold sweeps need one forward pass per question.
pub fn answer_distributions(model: &MrcModel, reports: &[Report]) -> Result<Vec<Vec<(Array1<f64>, Array1<f64>)>>> {
    reports
        .iter()
        .map(|r| {
            let chars = r.chars();
            Question::all().iter().map(|q| mrc_forward(model, q, &chars)).collect()
        })
        .collect()
}

/// Overall F1 on `gold` for each threshold in `taus`.
pub fn sweep_tau(model: &MrcModel, gold: &[Report], taus: &[f64]) -> Result<Vec<(f64, Prf)>> {
    let dists = answer_distributions(model, gold)?;
    let max_len = model.cfg.max_answer_len;
    taus.iter()
        .map(|&tau| {
            let preds: Vec<Report> = gold
                .iter()
                .zip(&dists)
                .map(|(r, qs)| {
                    let chars = r.chars();
                    let mut out = r.clone();
                    out.gold_spans = Question::all()
                        .iter()
                        .zip(qs)
                        .filter_map(|(q, (ps, pe))| {
                            match extract_answer(ps.as_slice()?, pe.as_slice()?, tau, max_len) {
                                AnswerDecision::Accept { start, end, .. } => {
                                    Some(Span::with_text(start, end, q.attribute, &chars))
                                }
                                AnswerDecision::Reject { .. } => None,
                            }
                        })
                        .collect();
                    out.gold_spans.sort();
                    out
                })
                .collect();
            Ok((tau, evaluate(gold, &preds)?.overall))
        })
        .collect()
}

/// Pointer-network training with the tagger optimiser settings. Questions
/// without a gold answer are skipped. Keeps the epoch with the best dev F1
/// (train F1 when `dev` is empty).
pub fn train_mrc(
    mut model: MrcModel,
    train: &[Report],
    dev: &[Report],
    tc: &TrainConfig,
) -> Result<(MrcModel, TrainHistory)> {
    let examples: Vec<MrcExample> = train.iter().flat_map(|r| model.examples(r)).collect();
    if examples.is_empty() {
        return Err(Error::InvalidInput("no answerable training questions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let sample: Vec<usize> = {
        let all: Vec<usize> = examples.iter().flat_map(|e| e.ids.iter().copied()).collect();
        (0..256).map(|_| *all.choose(&mut rng).expect("non-empty")).collect()
    };
    let features = model.features.clone();
    features.init_codebooks(&mut model.store, &sample, &mut rng);

    let selection = if dev.is_empty() { train } else { dev };
    let mut adam = Adam::new(&model.store, tc.learning_rate);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..tc.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches) = (0.0, 0);
        for (b, chunk) in order.chunks(tc.batch_size.max(1)).enumerate() {
            let batch: Vec<MrcExample> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, mut grads) = model.loss_and_gradient(&batch);
            let norm = crate::taggers::clip_global_norm(&mut grads, tc.clip_norm);
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    norms: format!("{:?}", model.store.norms()),
                });
            }
            adam.update(&mut model.store, &grads);
            loss_sum += loss;
            batches += 1;
        }
        let preds: Vec<Report> = selection
            .iter()
            .map(|r| mrc_predict_report(r, &model))
            .collect::<Result<_>>()?;
        let dev_prf = evaluate(selection, &preds)?.overall;
        debug!("mrc epoch {epoch}: loss {:.5} dev f1 {:.4}", loss_sum / batches as f64, dev_prf.f1);
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            dev: dev_prf,
            seconds: started.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|(f, _)| dev_prf.f1 > *f) {
            best = Some((dev_prf.f1, model.store.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tc.patience {
                break;
            }
        }
        if tc.target_dev_f1.is_some_and(|t| dev_prf.f1 >= t) {
            break;
        }
    }
    if let Some((f1, store)) = best {
        model.store = store;
        info!("mrc: best epoch {} of {}, dev f1 {f1:.4}", history.best_epoch, history.epochs.len());
    }
    model.store.round_to_f32();
    Ok((model, history))
}

pub fn save_mrc(model: &MrcModel, dir: &Path) -> Result<()> {
    save_store(dir, "mrc", serde_json::to_value(&model.cfg)?, &model.vocab, &model.store)
}

pub fn load_mrc(dir: &Path) -> Result<MrcModel> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != "mrc" {
        return Err(Error::Integrity(format!(
            "{} holds a `{}` model, not a reading-comprehension model",
            dir.display(),
            manifest.kind
        )));
    }
    let cfg: MrcConfig = serde_json::from_value(manifest.config.clone())?;
    let mut model = build_mrc(&cfg, manifest.vocab.clone())?;
    load_store(dir, &manifest, &mut model.store)?;
    Ok(model)
}
