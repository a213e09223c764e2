//! The eight single-model taggers: embedding, encoder, linear projection,
//! then a softmax or CRF decoder.

mod container;
mod encoder;
mod train;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    decode_tags, encode_tags, split_report_ranges, Report, Span, SplitConfig, Tag, LABEL_COUNT,
};
use crate::crf::{self, CrfParams, Mask};
use crate::encoders::Vocab;
use crate::error::{Error, Result};
use crate::graph::{Graph, Matrix, ParamId, ParamStore, Var};

pub use container::{
    load_model, load_store, read_manifest, save_model, save_store, Manifest, TensorEntry,
    CONTAINER_VERSION,
};
pub use encoder::{EncoderKind, EncoderParams, FeatureStack};
pub use train::{
    clip_global_norm,
    token_accuracy, train, train_split, Adam, EpochRecord, TrainConfig, TrainHistory,
};

/// The eight single-model configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Crf,
    Lstm,
    LstmCrf,
    CnnCrf,
    SelfAttention,
    Ucnn,
    RegressiveWavenet,
    AttentionLstm,
}

impl Architecture {
    pub const ALL: [Architecture; 8] = [
        Architecture::Crf,
        Architecture::Lstm,
        Architecture::LstmCrf,
        Architecture::CnnCrf,
        Architecture::SelfAttention,
        Architecture::Ucnn,
        Architecture::RegressiveWavenet,
        Architecture::AttentionLstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Crf => "crf",
            Architecture::Lstm => "lstm",
            Architecture::LstmCrf => "lstm_crf",
            Architecture::CnnCrf => "cnn_crf",
            Architecture::SelfAttention => "self_attention",
            Architecture::Ucnn => "ucnn",
            Architecture::RegressiveWavenet => "regressive_wavenet",
            Architecture::AttentionLstm => "attention_lstm",
        }
    }

    pub fn encoder(self) -> EncoderKind {
        match self {
            Architecture::Crf => EncoderKind::Identity,
            Architecture::Lstm | Architecture::LstmCrf => EncoderKind::BiLstm,
            Architecture::CnnCrf => EncoderKind::Cnn,
            Architecture::SelfAttention => EncoderKind::SelfAttention,
            Architecture::Ucnn => EncoderKind::Unet,
            Architecture::RegressiveWavenet => EncoderKind::Wavenet,
            Architecture::AttentionLstm => EncoderKind::AttentionLstm,
        }
    }

    pub fn default_decoder(self) -> Decoder {
        match self {
            Architecture::Crf | Architecture::LstmCrf | Architecture::CnnCrf => Decoder::Crf,
            _ => Decoder::Softmax,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|a| a.name()).collect();
            Error::Config(format!("unknown model `{s}`; valid names: {}", valid.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    Softmax,
    Crf,
}

/// Which parts of a report are tagged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextView {
    /// The whole report as one sequence.
    #[default]
    Joint,
    /// Impression and first findings sentence as separate sequences.
    Sections,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerConfig {
    pub name: Architecture,
    /// Overrides the architecture's decoder when set.
    pub decoder: Option<Decoder>,
    pub encoder: EncoderParams,
    /// Restrict CRF transitions to well-formed BIO.
    pub crf_mask: bool,
    /// Characters rarer than this map to UNK.
    pub min_char_freq: usize,
    pub view: TextView,
    pub split: SplitConfig,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            name: Architecture::LstmCrf,
            decoder: None,
            encoder: EncoderParams::default(),
            crf_mask: false,
            min_char_freq: 2,
            view: TextView::Joint,
            split: SplitConfig::default(),
            seed: 0,
        }
    }
}

impl TaggerConfig {
    pub fn new(name: Architecture, seed: u64) -> Self {
        TaggerConfig {
            name,
            seed,
            ..Default::default()
        }
    }

    pub fn decoder(&self) -> Decoder {
        self.decoder.unwrap_or(self.name.default_decoder())
    }
}

#[derive(Clone, Copy, Debug)]
struct CrfIds {
    transitions: ParamId,
    start: ParamId,
    stop: ParamId,
}

/// One training or prediction sequence: character ids and gold label ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub tags: Vec<usize>,
}

/// A built tagger: configuration, vocabulary and parameters.
#[derive(Clone, Debug)]
pub struct Tagger {
    cfg: TaggerConfig,
    vocab: Vocab,
    store: ParamStore,
    features: FeatureStack,
    proj_w: ParamId,
    proj_b: ParamId,
    crf: Option<CrfIds>,
}

/// Builds a tagger with parameters drawn deterministically from `cfg.seed`.
pub fn build_tagger(cfg: &TaggerConfig, vocab: Vocab) -> Result<Tagger> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let features = FeatureStack::build(cfg.name.encoder(), &cfg.encoder, vocab.len(), &mut store, &mut rng)?;
    let h = features.output_dim();
    let proj_w = store.add_uniform("proj.weight", h, LABEL_COUNT, h, &mut rng);
    let proj_b = store.add_zeros("proj.bias", 1, LABEL_COUNT);
    let crf = (cfg.decoder() == Decoder::Crf).then(|| CrfIds {
        transitions: store.add_zeros("crf.transitions", LABEL_COUNT, LABEL_COUNT),
        start: store.add_zeros("crf.start", 1, LABEL_COUNT),
        stop: store.add_zeros("crf.stop", 1, LABEL_COUNT),
    });
    store.round_to_f32();
    Ok(Tagger {
        cfg: cfg.clone(),
        vocab,
        store,
        features,
        proj_w,
        proj_b,
        crf,
    })
}

impl Tagger {
    pub fn config(&self) -> &TaggerConfig {
        &self.cfg
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

    pub fn features(&self) -> &FeatureStack {
        &self.features
    }

    pub fn decoder(&self) -> Decoder {
        self.cfg.decoder()
    }

    fn mask(&self) -> Option<Mask> {
        self.cfg.crf_mask.then(Mask::bio)
    }

    /// Current CRF parameters, for CRF-decoder models.
    pub fn crf_params(&self) -> Option<CrfParams> {
        self.crf.map(|ids| CrfParams {
            transitions: self.store.get(ids.transitions).clone(),
            start: self.store.get(ids.start).row(0).to_owned(),
            stop: self.store.get(ids.stop).row(0).to_owned(),
            allowed: self.mask(),
        })
    }

    /// `T×7` label scores.
    pub fn emissions(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let feats = self.features.forward(g, ids);
        let (w, b) = (g.param(self.proj_w), g.param(self.proj_b));
        g.affine(feats, w, b)
    }

    pub fn emission_matrix(&self, ids: &[usize]) -> Matrix {
        let mut g = Graph::new(&self.store);
        let e = self.emissions(&mut g, ids);
        g.value(e).clone()
    }

    /// Unnormalized loss node of one sequence: CRF negative log-likelihood,
    /// or cross-entropy summed over positions.
    pub fn sequence_loss(&self, g: &mut Graph, ex: &Example) -> Result<Var> {
        if ex.ids.len() != ex.tags.len() || ex.ids.is_empty() {
            return Err(Error::InvalidInput(format!(
                "sequence of {} characters with {} tags",
                ex.ids.len(),
                ex.tags.len()
            )));
        }
        let e = self.emissions(g, &ex.ids);
        match self.crf {
            Some(ids) => {
                let (a, s, t) = (g.param(ids.transitions), g.param(ids.start), g.param(ids.stop));
                g.crf_nll(e, a, s, t, self.mask().as_ref(), &ex.tags)
            }
            None => Ok(g.cross_entropy(e, &ex.tags)),
        }
    }

    fn normalizer(&self, batch: &[Example]) -> f64 {
        match self.decoder() {
            Decoder::Crf => batch.len() as f64,
            Decoder::Softmax => batch.iter().map(|e| e.ids.len()).sum::<usize>() as f64,
        }
    }

    /// Batch loss: mean NLL per sequence for CRF decoders, mean
    /// cross-entropy per position for softmax decoders.
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        let mut total = 0.0;
        for ex in batch {
            let mut g = Graph::new(&self.store);
            let l = self.sequence_loss(&mut g, ex)?;
            total += g.value(l)[[0, 0]];
        }
        Ok(total / self.normalizer(batch).max(1.0))
    }

    /// Batch loss and its gradient, one matrix per parameter.
    pub fn loss_and_gradient(&self, batch: &[Example]) -> Result<(f64, Vec<Matrix>)> {
        let norm = self.normalizer(batch).max(1.0);
        let mut grads: Vec<Matrix> = self
            .store
            .ids()
            .map(|id| Matrix::zeros(self.store.get(id).dim()))
            .collect();
        let mut total = 0.0;
        for ex in batch {
            let mut g = Graph::new(&self.store);
            let l = self.sequence_loss(&mut g, ex)?;
            total += g.value(l)[[0, 0]];
            g.backward(l).accumulate_into(&mut grads, 1.0 / norm);
        }
        Ok((total / norm, grads))
    }

    /// Label ids for one sequence: Viterbi for CRF decoders, per-position
    /// argmax otherwise.
    pub fn predict_ids(&self, ids: &[usize]) -> Vec<usize> {
        if ids.is_empty() {
            return Vec::new();
        }
        let e = self.emission_matrix(ids);
        match self.crf_params() {
            Some(p) => crf::viterbi(e.view(), &p).expect("shapes agree").0,
            None => crf::argmax_rows(e.view()),
        }
    }

    /// Character ranges tagged as separate sequences under the configured view.
    pub fn views(&self, report: &Report) -> Vec<Range<usize>> {
        let len = report.char_len();
        match self.cfg.view {
            TextView::Joint => vec![0..len],
            TextView::Sections => {
                let r = split_report_ranges(&report.text, &self.cfg.split);
                let mut views: Vec<Range<usize>> = [r.impression, r.findings_first]
                    .into_iter()
                    .filter(|v| !v.is_empty())
                    .collect();
                views.sort_by_key(|v| v.start);
                views
            }
        }
    }

    /// Training sequences for a report; gold spans outside a view are dropped.
    pub fn examples(&self, report: &Report) -> Result<Vec<Example>> {
        let chars = report.chars();
        self.views(report)
            .into_iter()
            .filter(|v| !v.is_empty())
            .map(|v| {
                let text: String = chars[v.clone()].iter().collect();
                let spans: Vec<Span> = report
                    .gold_spans
                    .iter()
                    .filter(|s| s.start >= v.start && s.end <= v.end)
                    .map(|s| Span::new(s.start - v.start, s.end - v.start, s.kind))
                    .collect();
                let tags = encode_tags(&spans, v.len())?;
                Ok(Example {
                    ids: self.vocab.encode(&text),
                    tags: tags.indices(),
                })
            })
            .collect()
    }

    /// Predicted spans with text filled in from the report.
    pub fn predict_spans(&self, report: &Report) -> Vec<Span> {
        let chars = report.chars();
        let mut spans = Vec::new();
        for v in self.views(report) {
            let text: String = chars[v.clone()].iter().collect();
            let labels = self.predict_ids(&self.vocab.encode(&text));
            let tags: Vec<Tag> = labels
                .into_iter()
                .map(|i| Tag::from_index(i).expect("label in range"))
                .collect();
            for s in decode_tags(&tags) {
                spans.push(Span::with_text(s.start + v.start, s.end + v.start, s.kind, &chars));
            }
        }
        spans.sort();
        spans
    }

    /// Copies `report` with its spans replaced by this model's predictions.
    pub fn predict_report(&self, report: &Report) -> Report {
        let mut out = report.clone();
        out.gold_spans = self.predict_spans(report);
        out
    }
}

/// Vocabulary over training texts with the configured frequency cutoff.
pub fn build_vocab(reports: &[Report], min_freq: usize, always: &[&str]) -> Vocab {
    Vocab::build(reports.iter().map(|r| r.text.as_str()), min_freq, always)
}
