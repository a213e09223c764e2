use rand::Rng;

use crate::encoders::Encoder;
use crate::graph::{Graph, ParamId, ParamStore, Var};

/// One direction of an LSTM with gate columns ordered `i, f, g, o`.
#[derive(Clone, Debug)]
pub struct LstmDirection {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmDirection {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        LstmDirection {
            w_input: store.add_uniform(format!("{prefix}.w_input"), input, 4 * hidden, hidden, rng),
            w_hidden: store.add_uniform(format!("{prefix}.w_hidden"), hidden, 4 * hidden, hidden, rng),
            bias: store.add_uniform(format!("{prefix}.bias"), 1, 4 * hidden, hidden, rng),
            hidden,
        }
    }

    /// Runs over `x` in the order given by `steps`; returns the hidden rows
    /// in that same order. Initial hidden and cell states are zero.
    pub fn run(&self, g: &mut Graph, x: Var, steps: impl Iterator<Item = usize>) -> Vec<Var> {
        let h = self.hidden;
        let (wx, wh, b) = (g.param(self.w_input), g.param(self.w_hidden), g.param(self.bias));
        let projected = g.affine(x, wx, b);
        let mut state: Option<(Var, Var)> = None;
        let mut out = Vec::new();
        for t in steps {
            let mut z = g.slice_rows(projected, t, 1);
            if let Some((h_prev, _)) = state {
                let rec = g.matmul(h_prev, wh);
                z = g.add(z, rec);
            }
            let i = g.slice_cols(z, 0, h);
            let i = g.sigmoid(i);
            let f = g.slice_cols(z, h, h);
            let f = g.sigmoid(f);
            let cand = g.slice_cols(z, 2 * h, h);
            let cand = g.tanh(cand);
            let o = g.slice_cols(z, 3 * h, h);
            let o = g.sigmoid(o);
            let mut c = g.mul(i, cand);
            if let Some((_, c_prev)) = state {
                let keep = g.mul(f, c_prev);
                c = g.add(keep, c);
            }
            let tc = g.tanh(c);
            let h_t = g.mul(o, tc);
            out.push(h_t);
            state = Some((h_t, c));
        }
        out
    }
}

/// Forward and backward LSTMs with outputs concatenated per position.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        BiLstm {
            forward: LstmDirection::new(store, &format!("{prefix}.fwd"), input, hidden, rng),
            backward: LstmDirection::new(store, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }
}

impl Encoder for BiLstm {
    fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let t_len = g.shape(x).0;
        let fwd = self.forward.run(g, x, 0..t_len);
        let mut bwd = self.backward.run(g, x, (0..t_len).rev());
        bwd.reverse();
        let fwd = g.concat_rows(&fwd);
        let bwd = g.concat_rows(&bwd);
        g.concat_cols(&[fwd, bwd])
    }
}
