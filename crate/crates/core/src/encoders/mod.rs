//! Character-sequence feature extractors. Every encoder maps a `T×d` input
//! to a `T×H` output inside a [`Graph`], so all of them are trainable by
//! the same reverse pass.

mod attention;
mod attention_lstm;
mod cnn;
mod embedding;
mod lstm;
mod unet;
mod wavenet;

pub use attention::{sinusoidal_positions, MultiHeadAttention};
pub use attention_lstm::{nearest_codeword, AttentionLstm, AttentionLstmCell, StepOutput};
pub use cnn::{conv1d, same_padding_taps, MultiWidthCnn};
pub use embedding::{Embedding, Vocab, PAD, SEP, UNK};
pub use lstm::{BiLstm, LstmDirection};
pub use unet::{UnetConfig, UnetEncoder};
pub use wavenet::{receptive_field, DilatedConvStack};

use crate::graph::{Graph, Var};

/// A length-preserving sequence encoder.
pub trait Encoder {
    fn output_dim(&self) -> usize;

    fn forward(&self, g: &mut Graph, x: Var) -> Var;
}
