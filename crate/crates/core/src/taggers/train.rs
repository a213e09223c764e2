use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Report;
use crate::error::{Error, Result};
use crate::eval::{evaluate, Prf};
use crate::graph::{Matrix, ParamStore};
use crate::taggers::{Example, Tagger};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a dev-F1 improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    pub seed: u64,
    /// Share of the corpus held out for early stopping by [`train`].
    pub dev_fraction: f64,
    /// Stop as soon as dev F1 reaches this value.
    pub target_dev_f1: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 8,
            max_epochs: 30,
            patience: 5,
            clip_norm: 5.0,
            seed: 0,
            dev_fraction: 0.1,
            target_dev_f1: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0)
            || self.batch_size == 0
            || self.max_epochs == 0
            || !(self.clip_norm > 0.0)
            || !(0.0..1.0).contains(&self.dev_fraction)
        {
            return Err(Error::Config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    pub dev: Prf,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Index of the first epoch with the highest dev F1.
    pub best_epoch: usize,
}

impl TrainHistory {
    /// `(train loss, dev F1)` per epoch, omitting wall time.
    pub fn trajectory(&self) -> Vec<(f64, f64)> {
        self.epochs.iter().map(|e| (e.train_loss, e.dev.f1)).collect()
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Matrix> = store.ids().map(|id| Matrix::zeros(store.get(id).dim())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, store: &mut ParamStore, grads: &[Matrix]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = &grads[i];
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= k;
        }
    }
    norm
}

/// Share of characters whose predicted label equals the gold label.
pub fn token_accuracy(model: &Tagger, reports: &[Report]) -> Result<f64> {
    let (mut right, mut total) = (0usize, 0usize);
    for r in reports {
        for ex in model.examples(r)? {
            let pred = model.predict_ids(&ex.ids);
            right += pred.iter().zip(&ex.tags).filter(|(a, b)| a == b).count();
            total += ex.tags.len();
        }
    }
    Ok(if total == 0 { 1.0 } else { right as f64 / total as f64 })
}

fn dev_score(model: &Tagger, dev: &[Report]) -> Result<Prf> {
    let preds: Vec<Report> = dev.iter().map(|r| model.predict_report(r)).collect();
    Ok(evaluate(dev, &preds)?.overall)
}

fn norms_summary(store: &ParamStore) -> String {
    store
        .norms()
        .into_iter()
        .map(|(n, v)| format!("{n}={v:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Holds out `tc.dev_fraction` of `corpus` (seeded shuffle) and trains on
/// the rest. With no dev reports, model selection uses the training set.
pub fn train(model: Tagger, corpus: &[Report], tc: &TrainConfig) -> Result<(Tagger, TrainHistory)> {
    tc.validate()?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed));
    let n_dev = (corpus.len() as f64 * tc.dev_fraction).round() as usize;
    let dev: Vec<Report> = order[..n_dev].iter().map(|&i| corpus[i].clone()).collect();
    let train: Vec<Report> = order[n_dev..].iter().map(|&i| corpus[i].clone()).collect();
    train_split(model, &train, &dev, tc)
}

/// Mini-batch Adam with global-norm clipping and early stopping on dev
/// span-F1. Returns the parameters of the best epoch.
pub fn train_split(
    mut model: Tagger,
    train: &[Report],
    dev: &[Report],
    tc: &TrainConfig,
) -> Result<(Tagger, TrainHistory)> {
    tc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let examples: Vec<Example> = train
        .iter()
        .map(|r| model.examples(r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if examples.is_empty() {
        return Err(Error::InvalidInput("no training sequences".into()));
    }
    let sample: Vec<usize> = {
        let all: Vec<usize> = examples.iter().flat_map(|e| e.ids.iter().copied()).collect();
        (0..256).map(|_| *all.choose(&mut rng).expect("non-empty")).collect()
    };
    let features = model.features().clone();
    features.init_codebooks(model.store_mut(), &sample, &mut rng);

    let selection = if dev.is_empty() { train } else { dev };
    let mut adam = Adam::new(model.store(), tc.learning_rate);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ParamStore)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..tc.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, mut grads) = model.loss_and_gradient(&batch)?;
            let norm = clip_global_norm(&mut grads, tc.clip_norm);
            if !loss.is_finite() || !norm.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    norms: norms_summary(model.store()),
                });
            }
            adam.update(model.store_mut(), &grads);
            loss_sum += loss;
            batches += 1;
        }
        let dev_prf = dev_score(&model, selection)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            dev: dev_prf,
            seconds: started.elapsed().as_secs_f64(),
        };
        debug!(
            "{} epoch {epoch}: loss {:.5} dev f1 {:.4}",
            model.config().name,
            record.train_loss,
            record.dev.f1
        );
        history.epochs.push(record);
        if best.as_ref().is_none_or(|(f, _)| dev_prf.f1 > *f) {
            best = Some((dev_prf.f1, model.store().clone()));
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
        *model.store_mut() = store;
        info!(
            "{}: best epoch {} of {}, dev f1 {f1:.4}",
            model.config().name,
            history.best_epoch,
            history.epochs.len()
        );
    }
    model.store_mut().round_to_f32();
    Ok((model, history))
}
