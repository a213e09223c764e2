use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{
    sinusoidal_positions, AttentionLstm, BiLstm, DilatedConvStack, Embedding, Encoder,
    MultiHeadAttention, MultiWidthCnn, UnetConfig, UnetEncoder,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, Matrix, ParamStore, Var};

/// Feature extractor placed between the embedding and the output layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Embeddings feed the output layer directly.
    Identity,
    BiLstm,
    Cnn,
    SelfAttention,
    Unet,
    Wavenet,
    AttentionLstm,
}

/// Hyperparameters for every encoder; each kind reads its own fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderParams {
    /// Embedding width for all kinds except self-attention, which embeds
    /// straight into `attention_dim`.
    pub embedding_dim: usize,
    pub lstm_hidden: usize,
    pub cnn_widths: Vec<usize>,
    pub cnn_filters: usize,
    pub attention_dim: usize,
    pub attention_heads: usize,
    pub wavenet_layers: usize,
    pub wavenet_channels: usize,
    pub wavenet_residual: bool,
    pub unet: UnetConfig,
    pub attention_lstm_hidden: usize,
    pub attention_lstm_query_dim: usize,
    pub attention_lstm_codewords: usize,
}

impl Default for EncoderParams {
    fn default() -> Self {
        EncoderParams {
            embedding_dim: 32,
            lstm_hidden: 32,
            cnn_widths: vec![2, 3, 4],
            cnn_filters: 128,
            attention_dim: 256,
            attention_heads: 16,
            wavenet_layers: 3,
            wavenet_channels: 64,
            wavenet_residual: true,
            unet: UnetConfig::default(),
            attention_lstm_hidden: 32,
            attention_lstm_query_dim: 16,
            attention_lstm_codewords: 16,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self, kind: EncoderKind) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("embedding_dim", self.embedding_dim)?;
        match kind {
            EncoderKind::Identity => Ok(()),
            EncoderKind::BiLstm => positive("lstm_hidden", self.lstm_hidden),
            EncoderKind::Cnn => {
                positive("cnn_filters", self.cnn_filters)?;
                if self.cnn_widths.is_empty() || self.cnn_widths.contains(&0) {
                    return Err(Error::Config("cnn_widths must be non-empty and positive".into()));
                }
                Ok(())
            }
            EncoderKind::SelfAttention => {
                positive("attention_heads", self.attention_heads)?;
                if self.attention_dim == 0 || self.attention_dim % self.attention_heads != 0 {
                    return Err(Error::Config(format!(
                        "attention_dim {} must be a positive multiple of attention_heads {}",
                        self.attention_dim, self.attention_heads
                    )));
                }
                Ok(())
            }
            EncoderKind::Unet => {
                positive("unet.base_channels", self.unet.base_channels)?;
                positive("unet.kernel", self.unet.kernel)
            }
            EncoderKind::Wavenet => {
                positive("wavenet_layers", self.wavenet_layers)?;
                positive("wavenet_channels", self.wavenet_channels)
            }
            EncoderKind::AttentionLstm => {
                positive("attention_lstm_hidden", self.attention_lstm_hidden)?;
                positive("attention_lstm_query_dim", self.attention_lstm_query_dim)?;
                positive("attention_lstm_codewords", self.attention_lstm_codewords)
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Body {
    Identity,
    BiLstm(BiLstm),
    Cnn(MultiWidthCnn),
    SelfAttention(MultiHeadAttention),
    Unet(UnetEncoder),
    Wavenet(DilatedConvStack),
    AttentionLstm(AttentionLstm),
}

/// Embedding plus encoder, registered in a parameter store.
#[derive(Clone, Debug)]
pub struct FeatureStack {
    pub embedding: Embedding,
    body: Body,
    out_dim: usize,
}

impl FeatureStack {
    pub fn build(
        kind: EncoderKind,
        p: &EncoderParams,
        vocab_size: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        p.validate(kind)?;
        let emb_dim = if kind == EncoderKind::SelfAttention {
            p.attention_dim
        } else {
            p.embedding_dim
        };
        let embedding = Embedding::new(store, vocab_size, emb_dim, rng);
        let body = match kind {
            EncoderKind::Identity => Body::Identity,
            EncoderKind::BiLstm => Body::BiLstm(BiLstm::new(store, "bilstm", emb_dim, p.lstm_hidden, rng)),
            EncoderKind::Cnn => Body::Cnn(MultiWidthCnn::new(
                store,
                "cnn",
                emb_dim,
                &p.cnn_widths,
                p.cnn_filters,
                rng,
            )),
            EncoderKind::SelfAttention => Body::SelfAttention(MultiHeadAttention::new(
                store,
                "mha",
                emb_dim,
                p.attention_heads,
                p.attention_dim / p.attention_heads,
                rng,
            )),
            EncoderKind::Unet => Body::Unet(UnetEncoder::new(store, "unet", emb_dim, &p.unet, rng)),
            EncoderKind::Wavenet => Body::Wavenet(DilatedConvStack::new(
                store,
                "wavenet",
                emb_dim,
                p.wavenet_channels,
                p.wavenet_layers,
                p.wavenet_residual,
                rng,
            )),
            EncoderKind::AttentionLstm => Body::AttentionLstm(AttentionLstm::new(
                store,
                "attn_lstm",
                emb_dim,
                p.attention_lstm_hidden,
                p.attention_lstm_query_dim,
                p.attention_lstm_codewords,
                rng,
            )?),
        };
        let out_dim = match &body {
            Body::Identity => emb_dim,
            Body::BiLstm(e) => e.output_dim(),
            Body::Cnn(e) => e.output_dim(),
            Body::SelfAttention(e) => e.output_dim(),
            Body::Unet(e) => e.output_dim(),
            Body::Wavenet(e) => e.output_dim(),
            Body::AttentionLstm(e) => e.output_dim(),
        };
        Ok(FeatureStack {
            embedding,
            body,
            out_dim,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.out_dim
    }

    /// `T×H` features for a character-id sequence.
    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let x = self.embedding.forward(g, ids);
        match &self.body {
            Body::Identity => x,
            Body::BiLstm(e) => e.forward(g, x),
            Body::Cnn(e) => e.forward(g, x),
            Body::SelfAttention(e) => {
                // residual block over position-encoded embeddings
                let pe = g.input(sinusoidal_positions(ids.len(), e.d_model));
                let x = g.add(x, pe);
                let y = e.forward(g, x);
                g.add(x, y)
            }
            Body::Unet(e) => e.forward(g, x),
            Body::Wavenet(e) => e.forward(g, x),
            Body::AttentionLstm(e) => e.forward(g, x),
        }
    }

    /// Seeds attention-LSTM codebooks from the embeddings of sampled
    /// character ids; no-op for other encoders.
    pub fn init_codebooks(&self, store: &mut ParamStore, sample_ids: &[usize], rng: &mut impl Rng) {
        if let Body::AttentionLstm(enc) = &self.body {
            let table = store.get(self.embedding.weights);
            let mut samples = Matrix::zeros((sample_ids.len(), table.ncols()));
            for (r, &id) in sample_ids.iter().enumerate() {
                samples.row_mut(r).assign(&table.row(id));
            }
            enc.init_codebooks(store, &samples, rng);
        }
    }
}
