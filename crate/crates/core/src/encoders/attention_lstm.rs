use ndarray::ArrayView1;
use rand::Rng;

use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::graph::{Graph, Matrix, ParamId, ParamStore, Var};

/// Index of the codebook row nearest to `query` in Euclidean distance;
/// ties go to the smaller index.
pub fn nearest_codeword(query: ArrayView1<f64>, codebook: &Matrix) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, row) in codebook.rows().into_iter().enumerate() {
        let d: f64 = row.iter().zip(query.iter()).map(|(m, q)| (q - m).powi(2)).sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// LSTM cell whose candidate input is the residual between a query and its
/// nearest codeword.
///
/// `q = [x; h_prev]·W_q + b_q`, `r = q − m_k*`, `g = tanh(r·W_g + b_g)`;
/// the input, forget and output gates read `[x; h_prev]` as usual. The
/// codeword index is treated as a constant, so gradients reach the query
/// and the selected codebook row through `r` only.
#[derive(Clone, Debug)]
pub struct AttentionLstmCell {
    pub w_query: ParamId,
    pub b_query: ParamId,
    pub codebook: ParamId,
    pub w_candidate: ParamId,
    pub b_candidate: ParamId,
    /// Gate weights over `[x; h_prev]`, columns ordered `i, f, o`.
    pub w_gates: ParamId,
    pub b_gates: ParamId,
    pub input: usize,
    pub hidden: usize,
    pub query_dim: usize,
}

/// Result of one recurrence step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutput {
    pub h: Var,
    pub c: Var,
    pub codeword: usize,
}

impl AttentionLstmCell {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        query_dim: usize,
        codewords: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if codewords == 0 {
            return Err(Error::Config("attention-LSTM codebook needs at least one codeword".into()));
        }
        let joint = input + hidden;
        Ok(AttentionLstmCell {
            w_query: store.add_uniform(format!("{prefix}.w_query"), joint, query_dim, joint, rng),
            b_query: store.add_uniform(format!("{prefix}.b_query"), 1, query_dim, joint, rng),
            codebook: store.add_uniform(format!("{prefix}.codebook"), codewords, query_dim, query_dim, rng),
            w_candidate: store.add_uniform(format!("{prefix}.w_candidate"), query_dim, hidden, query_dim, rng),
            b_candidate: store.add_uniform(format!("{prefix}.b_candidate"), 1, hidden, query_dim, rng),
            w_gates: store.add_uniform(format!("{prefix}.w_gates"), joint, 3 * hidden, joint, rng),
            b_gates: store.add_uniform(format!("{prefix}.b_gates"), 1, 3 * hidden, joint, rng),
            input,
            hidden,
            query_dim,
        })
    }

    /// One step on the 1×d row `x`, with `None` standing for zero state.
    pub fn step(&self, g: &mut Graph, x: Var, state: Option<(Var, Var)>) -> StepOutput {
        let xq = self.input_query(g, x);
        let xz = self.input_gates(g, x);
        self.step_projected(g, xq, xz, state)
    }

    fn input_query(&self, g: &mut Graph, x: Var) -> Var {
        let wq = g.param(self.w_query);
        let wqx = g.slice_rows(wq, 0, self.input);
        let bq = g.param(self.b_query);
        g.affine(x, wqx, bq)
    }

    fn input_gates(&self, g: &mut Graph, x: Var) -> Var {
        let wz = g.param(self.w_gates);
        let wzx = g.slice_rows(wz, 0, self.input);
        let bz = g.param(self.b_gates);
        g.affine(x, wzx, bz)
    }

    fn step_projected(&self, g: &mut Graph, xq: Var, xz: Var, state: Option<(Var, Var)>) -> StepOutput {
        let hd = self.hidden;
        let (mut q, mut z) = (xq, xz);
        if let Some((h_prev, _)) = state {
            let wq = g.param(self.w_query);
            let wqh = g.slice_rows(wq, self.input, hd);
            let hq = g.matmul(h_prev, wqh);
            q = g.add(q, hq);
            let wz = g.param(self.w_gates);
            let wzh = g.slice_rows(wz, self.input, hd);
            let hz = g.matmul(h_prev, wzh);
            z = g.add(z, hz);
        }
        let codebook = g.param(self.codebook);
        let k = nearest_codeword(g.value(q).row(0), g.value(codebook));
        let m = g.gather_rows(codebook, &[k]);
        let r = g.sub(q, m);
        let (wc, bc) = (g.param(self.w_candidate), g.param(self.b_candidate));
        let cand = g.affine(r, wc, bc);
        let cand = g.tanh(cand);
        let i = g.slice_cols(z, 0, hd);
        let i = g.sigmoid(i);
        let f = g.slice_cols(z, hd, hd);
        let f = g.sigmoid(f);
        let o = g.slice_cols(z, 2 * hd, hd);
        let o = g.sigmoid(o);
        let mut c = g.mul(i, cand);
        if let Some((_, c_prev)) = state {
            let keep = g.mul(f, c_prev);
            c = g.add(keep, c);
        }
        let tc = g.tanh(c);
        let h = g.mul(o, tc);
        StepOutput { h, c, codeword: k }
    }

    /// Runs the cell over rows of `x` in `steps` order; returns hidden rows
    /// and chosen codewords in that order.
    pub fn run(&self, g: &mut Graph, x: Var, steps: impl Iterator<Item = usize>) -> (Vec<Var>, Vec<usize>) {
        let xq_all = self.input_query(g, x);
        let xz_all = self.input_gates(g, x);
        let mut state = None;
        let mut hs = Vec::new();
        let mut codes = Vec::new();
        for t in steps {
            let xq = g.slice_rows(xq_all, t, 1);
            let xz = g.slice_rows(xz_all, t, 1);
            let out = self.step_projected(g, xq, xz, state);
            hs.push(out.h);
            codes.push(out.codeword);
            state = Some((out.h, out.c));
        }
        (hs, codes)
    }

    /// Queries with zero hidden state for each row of `x` (values only).
    pub fn zero_state_queries(&self, store: &ParamStore, x: &Matrix) -> Matrix {
        let wq = store.get(self.w_query);
        let bq = store.get(self.b_query);
        x.dot(&wq.slice(ndarray::s![..self.input, ..])) + bq
    }
}

/// Bidirectional attention-LSTM: one cell per direction, each with its own
/// codebook, outputs concatenated per position.
#[derive(Clone, Debug)]
pub struct AttentionLstm {
    pub forward: AttentionLstmCell,
    pub backward: AttentionLstmCell,
}

impl AttentionLstm {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        query_dim: usize,
        codewords: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(AttentionLstm {
            forward: AttentionLstmCell::new(store, &format!("{prefix}.fwd"), input, hidden, query_dim, codewords, rng)?,
            backward: AttentionLstmCell::new(store, &format!("{prefix}.bwd"), input, hidden, query_dim, codewords, rng)?,
        })
    }

    /// Re-seeds both codebooks from zero-state queries of sampled inputs.
    /// `samples` rows are drawn with replacement when fewer than codewords.
    pub fn init_codebooks(&self, store: &mut ParamStore, samples: &Matrix, rng: &mut impl Rng) {
        if samples.nrows() == 0 {
            return;
        }
        for cell in [&self.forward, &self.backward] {
            let queries = cell.zero_state_queries(store, samples);
            let k = store.get(cell.codebook).nrows();
            let mut order: Vec<usize> = (0..queries.nrows()).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
            let book = store.get_mut(cell.codebook);
            for row in 0..k {
                let src = order[row % order.len()];
                book.row_mut(row).assign(&queries.row(src));
            }
        }
    }
}

impl Encoder for AttentionLstm {
    fn output_dim(&self) -> usize {
        2 * self.forward.hidden
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let t_len = g.shape(x).0;
        let (fwd, _) = self.forward.run(g, x, 0..t_len);
        let (mut bwd, _) = self.backward.run(g, x, (0..t_len).rev());
        bwd.reverse();
        let fwd = g.concat_rows(&fwd);
        let bwd = g.concat_rows(&bwd);
        g.concat_cols(&[fwd, bwd])
    }
}
