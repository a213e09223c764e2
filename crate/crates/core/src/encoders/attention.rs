use rand::Rng;

use crate::encoders::Encoder;
use crate::graph::{Graph, Matrix, ParamId, ParamStore, Var};

/// Scaled dot-product self-attention with `heads` heads of width `d_k`.
///
/// `w_q`, `w_k`, `w_v` are `d_model×(heads·d_k)`, head `i` owning columns
/// `i·d_k..(i+1)·d_k`; `w_o` is `(heads·d_k)×d_model`.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    pub heads: usize,
    pub d_k: usize,
    pub d_model: usize,
}

impl MultiHeadAttention {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        d_model: usize,
        heads: usize,
        d_k: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let inner = heads * d_k;
        MultiHeadAttention {
            w_q: store.add_uniform(format!("{prefix}.w_q"), d_model, inner, d_model, rng),
            w_k: store.add_uniform(format!("{prefix}.w_k"), d_model, inner, d_model, rng),
            w_v: store.add_uniform(format!("{prefix}.w_v"), d_model, inner, d_model, rng),
            w_o: store.add_uniform(format!("{prefix}.w_o"), inner, d_model, inner, rng),
            heads,
            d_k,
            d_model,
        }
    }

    /// Output together with each head's `T×T` attention weights.
    pub fn forward_with_weights(&self, g: &mut Graph, x: Var) -> (Var, Vec<Var>) {
        let (wq, wk, wv, wo) = (
            g.param(self.w_q),
            g.param(self.w_k),
            g.param(self.w_v),
            g.param(self.w_o),
        );
        let q = g.matmul(x, wq);
        let k = g.matmul(x, wk);
        let v = g.matmul(x, wv);
        let scale = 1.0 / (self.d_k as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let col = h * self.d_k;
            let qh = g.slice_cols(q, col, self.d_k);
            let kh = g.slice_cols(k, col, self.d_k);
            let vh = g.slice_cols(v, col, self.d_k);
            let scores = g.matmul_t(qh, kh);
            let scores = g.scale(scores, scale);
            let attn = g.softmax_rows(scores);
            heads.push(g.matmul(attn, vh));
            weights.push(attn);
        }
        let concat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads) };
        (g.matmul(concat, wo), weights)
    }
}

impl Encoder for MultiHeadAttention {
    fn output_dim(&self) -> usize {
        self.d_model
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        self.forward_with_weights(g, x).0
    }
}

/// Fixed sinusoidal position encoding, `T×d`.
pub fn sinusoidal_positions(t_len: usize, d: usize) -> Matrix {
    Matrix::from_shape_fn((t_len, d), |(pos, i)| {
        let rate = 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
        let angle = pos as f64 / rate;
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}
