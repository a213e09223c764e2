//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation of one forward pass; [`Graph::backward`]
//! walks the record in reverse. Parameters live in a [`ParamStore`] and enter
//! a graph as leaves on first use.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;

use crate::crf::{self, CrfParams};
use crate::error::Result;

pub type Matrix = Array2<f64>;

/// Index of a parameter tensor within a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named parameter tensors in registration order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Uniform init in `±1/√fan_in`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Matrix::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound));
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Matrix::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Rounds every value to the nearest `f32`, the precision models are
    /// stored in.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            v.mapv_inplace(|x| x as f32 as f64);
        }
    }

    pub fn norms(&self) -> Vec<(String, f64)> {
        self.iter()
            .map(|(n, v)| (n.to_string(), v.iter().map(|x| x * x).sum::<f64>().sqrt()))
            .collect()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a + b` with the 1×n row `b` broadcast over rows.
    AddRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    /// `out[t] = a[t + offset]`, zero outside the input.
    Shift(Var, isize),
    GatherRows(Var, Vec<usize>),
    /// Pairwise row max; stores the winning source row per output entry.
    MaxPool2(Var, Array2<usize>),
    Upsample2(Var),
    PadRows(Var),
    SumAll(Var),
    /// Summed cross-entropy; stores the row softmax.
    CrossEntropy(Var, Vec<usize>, Matrix),
    /// CRF negative log-likelihood; stores the gradient blocks.
    CrfNll([Var; 4], Box<crf::CrfGradient>),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// One forward pass worth of recorded operations.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    params: Vec<Option<Var>>,
}

/// Gradients of a scalar with respect to every node of a graph.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    params: Vec<Option<Var>>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// Gradient for a parameter, `None` when the forward pass never used it.
    pub fn param(&self, id: ParamId) -> Option<&Matrix> {
        self.params[id.0].and_then(|v| self.grads[v.0].as_ref())
    }

    /// Adds this graph's parameter gradients into `acc`, which holds one slot
    /// per store entry.
    pub fn accumulate_into(&self, acc: &mut [Matrix], scale: f64) {
        for (i, slot) in acc.iter_mut().enumerate() {
            if let Some(g) = self.param(ParamId(i)) {
                slot.scaled_add(scale, g);
            }
        }
    }
}

fn add_into(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
    out
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            params: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf holding `value`; gradients still flow to it.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.params[id.0] {
            return v;
        }
        let v = self.push(self.store.get(id).clone(), Op::Leaf);
        self.params[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        debug_assert_eq!(self.shape(row).0, 1);
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    /// `x · w + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("column counts agree");
        self.push(value, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn shift(&mut self, a: Var, offset: isize) -> Var {
        let src = self.value(a);
        let (rows, cols) = src.dim();
        let mut value = Matrix::zeros((rows, cols));
        for t in 0..rows {
            let from = t as isize + offset;
            if from >= 0 && (from as usize) < rows {
                value.row_mut(t).assign(&src.row(from as usize));
            }
        }
        self.push(value, Op::Shift(a, offset))
    }

    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Var {
        let src = self.value(table);
        let mut value = Matrix::zeros((indices.len(), src.ncols()));
        for (t, &i) in indices.iter().enumerate() {
            value.row_mut(t).assign(&src.row(i));
        }
        self.push(value, Op::GatherRows(table, indices.to_vec()))
    }

    /// Halves the row count by taking the max over row pairs `(2i, 2i+1)`;
    /// ties go to the first row.
    pub fn max_pool2(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let (rows, cols) = src.dim();
        debug_assert_eq!(rows % 2, 0);
        let mut value = Matrix::zeros((rows / 2, cols));
        let mut argmax = Array2::zeros((rows / 2, cols));
        for i in 0..rows / 2 {
            for c in 0..cols {
                let (x, y) = (src[[2 * i, c]], src[[2 * i + 1, c]]);
                let pick = if y > x { 2 * i + 1 } else { 2 * i };
                value[[i, c]] = x.max(y);
                argmax[[i, c]] = pick;
            }
        }
        self.push(value, Op::MaxPool2(a, argmax))
    }

    /// Nearest-neighbour ×2 upsampling along rows.
    pub fn upsample2(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let (rows, cols) = src.dim();
        let mut value = Matrix::zeros((rows * 2, cols));
        for t in 0..rows * 2 {
            value.row_mut(t).assign(&src.row(t / 2));
        }
        self.push(value, Op::Upsample2(a))
    }

    /// Appends zero rows up to `rows`.
    pub fn pad_rows(&mut self, a: Var, rows: usize) -> Var {
        let src = self.value(a);
        let mut value = Matrix::zeros((rows, src.ncols()));
        value.slice_mut(s![..src.nrows(), ..]).assign(src);
        self.push(value, Op::PadRows(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::SumAll(a))
    }

    /// `Σ_t −log softmax(logits[t])[targets[t]]` as a 1×1 node.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let probs = softmax_rows(self.value(logits));
        debug_assert_eq!(probs.nrows(), targets.len());
        let loss: f64 = targets
            .iter()
            .enumerate()
            .map(|(t, &y)| -probs[[t, y]].max(f64::MIN_POSITIVE).ln())
            .sum();
        let value = Matrix::from_elem((1, 1), loss);
        self.push(value, Op::CrossEntropy(logits, targets.to_vec(), probs))
    }

    /// CRF negative log-likelihood of `tags` as a 1×1 node. `start` and
    /// `stop` are 1×L rows.
    pub fn crf_nll(
        &mut self,
        emissions: Var,
        transitions: Var,
        start: Var,
        stop: Var,
        mask: Option<&crf::Mask>,
        tags: &[usize],
    ) -> Result<Var> {
        let params = CrfParams {
            transitions: self.value(transitions).clone(),
            start: self.value(start).row(0).to_owned(),
            stop: self.value(stop).row(0).to_owned(),
            allowed: mask.cloned(),
        };
        let g = crf::nll_and_gradient(self.value(emissions).view(), &params, tags)?;
        let value = Matrix::from_elem((1, 1), g.loss);
        Ok(self.push(
            value,
            Op::CrfNll([emissions, transitions, start, stop], Box::new(g)),
        ))
    }

    /// Gradients of the 1×1 node `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        debug_assert_eq!(self.shape(output), (1, 1));
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::ones((1, 1)));
        for idx in (0..=output.0).rev() {
            let Some(up) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let val = |v: Var| &self.nodes[v.0].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    add_into(&mut grads[a.0], up.dot(&val(*b).t()));
                    add_into(&mut grads[b.0], val(*a).t().dot(&up));
                }
                Op::MatMulT(a, b) => {
                    add_into(&mut grads[a.0], up.dot(val(*b)));
                    add_into(&mut grads[b.0], up.t().dot(val(*a)));
                }
                Op::Add(a, b) => {
                    add_into(&mut grads[b.0], up.clone());
                    add_into(&mut grads[a.0], up.clone());
                }
                Op::Sub(a, b) => {
                    add_into(&mut grads[b.0], -&up);
                    add_into(&mut grads[a.0], up.clone());
                }
                Op::Mul(a, b) => {
                    add_into(&mut grads[a.0], &up * val(*b));
                    add_into(&mut grads[b.0], &up * val(*a));
                }
                Op::AddRow(a, b) => {
                    add_into(&mut grads[b.0], up.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    add_into(&mut grads[a.0], up.clone());
                }
                Op::Scale(a, c) => add_into(&mut grads[a.0], &up * *c),
                Op::Tanh(a) => {
                    let mut g = up.clone();
                    Zip::from(&mut g)
                        .and(&node.value)
                        .for_each(|g, &y| *g *= 1.0 - y * y);
                    add_into(&mut grads[a.0], g);
                }
                Op::Sigmoid(a) => {
                    let mut g = up.clone();
                    Zip::from(&mut g)
                        .and(&node.value)
                        .for_each(|g, &y| *g *= y * (1.0 - y));
                    add_into(&mut grads[a.0], g);
                }
                Op::Relu(a) => {
                    let mut g = up.clone();
                    Zip::from(&mut g)
                        .and(val(*a))
                        .for_each(|g, &x| *g = if x > 0.0 { *g } else { 0.0 });
                    add_into(&mut grads[a.0], g);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let dots: Array1<f64> = (&up * y).sum_axis(Axis(1));
                    let g = y * &(&up - &dots.insert_axis(Axis(1)));
                    add_into(&mut grads[a.0], g);
                }
                Op::ConcatCols(parts) => {
                    let mut col = 0;
                    for p in parts {
                        let w = val(*p).ncols();
                        add_into(&mut grads[p.0], up.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut row = 0;
                    for p in parts {
                        let h = val(*p).nrows();
                        add_into(&mut grads[p.0], up.slice(s![row..row + h, ..]).to_owned());
                        row += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut g = Matrix::zeros(val(*a).dim());
                    g.slice_mut(s![*start..*start + up.nrows(), ..]).assign(&up);
                    add_into(&mut grads[a.0], g);
                }
                Op::SliceCols(a, start) => {
                    let mut g = Matrix::zeros(val(*a).dim());
                    g.slice_mut(s![.., *start..*start + up.ncols()]).assign(&up);
                    add_into(&mut grads[a.0], g);
                }
                Op::Shift(a, offset) => {
                    let rows = up.nrows();
                    let mut g = Matrix::zeros(up.dim());
                    for t in 0..rows {
                        let from = t as isize + offset;
                        if from >= 0 && (from as usize) < rows {
                            g.row_mut(from as usize).assign(&up.row(t));
                        }
                    }
                    add_into(&mut grads[a.0], g);
                }
                Op::GatherRows(table, indices) => {
                    let mut g = Matrix::zeros(val(*table).dim());
                    for (t, &i) in indices.iter().enumerate() {
                        let mut row = g.row_mut(i);
                        row += &up.row(t);
                    }
                    add_into(&mut grads[table.0], g);
                }
                Op::MaxPool2(a, argmax) => {
                    let mut g = Matrix::zeros(val(*a).dim());
                    for ((i, c), &src) in argmax.indexed_iter() {
                        g[[src, c]] += up[[i, c]];
                    }
                    add_into(&mut grads[a.0], g);
                }
                Op::Upsample2(a) => {
                    let mut g = Matrix::zeros(val(*a).dim());
                    for t in 0..up.nrows() {
                        let mut row = g.row_mut(t / 2);
                        row += &up.row(t);
                    }
                    add_into(&mut grads[a.0], g);
                }
                Op::PadRows(a) => {
                    let rows = val(*a).nrows();
                    add_into(&mut grads[a.0], up.slice(s![..rows, ..]).to_owned());
                }
                Op::SumAll(a) => {
                    let g = Matrix::from_elem(val(*a).dim(), up[[0, 0]]);
                    add_into(&mut grads[a.0], g);
                }
                Op::CrossEntropy(logits, targets, probs) => {
                    let mut g = probs.clone();
                    for (t, &y) in targets.iter().enumerate() {
                        g[[t, y]] -= 1.0;
                    }
                    add_into(&mut grads[logits.0], g * up[[0, 0]]);
                }
                Op::CrfNll([e, a, s0, s1], g) => {
                    let k = up[[0, 0]];
                    add_into(&mut grads[e.0], &g.d_emissions * k);
                    add_into(&mut grads[a.0], &g.d_transitions * k);
                    add_into(&mut grads[s0.0], (&g.d_start * k).insert_axis(Axis(0)));
                    add_into(&mut grads[s1.0], (&g.d_stop * k).insert_axis(Axis(0)));
                }
            }
            grads[idx] = Some(up);
        }
        Gradients {
            grads,
            params: self.params.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central differences of `f` with respect to every entry of `x`.
    fn numeric(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
        let h = 1e-6;
        let mut g = Matrix::zeros(x.dim());
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            xp[[r, c]] += h;
            xm[[r, c]] -= h;
            g[[r, c]] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn check(x: Matrix, build: impl Fn(&mut Graph, Var) -> Var) {
        let store = ParamStore::new();
        let eval = |m: &Matrix| {
            let mut g = Graph::new(&store);
            let v = g.input(m.clone());
            let out = build(&mut g, v);
            let s = g.sum_all(out);
            g.value(s)[[0, 0]]
        };
        let mut g = Graph::new(&store);
        let v = g.input(x.clone());
        let out = build(&mut g, v);
        let s = g.sum_all(out);
        let analytic = g.backward(s).of(v).unwrap().clone();
        let num = numeric(&x, eval);
        for (a, n) in analytic.iter().zip(num.iter()) {
            assert!((a - n).abs() < 1e-6 * (1.0 + a.abs()), "{analytic} vs {num}");
        }
    }

    fn x() -> Matrix {
        array![[0.3, -1.2, 0.5], [0.9, 0.1, -0.4], [-0.7, 0.2, 1.1], [0.05, 0.6, -0.3]]
    }

    #[test]
    fn elementwise_ops() {
        check(x(), |g, v| g.tanh(v));
        check(x(), |g, v| g.sigmoid(v));
        check(x(), |g, v| g.relu(v));
        check(x(), |g, v| {
            let t = g.tanh(v);
            g.mul(t, v)
        });
        check(x(), |g, v| {
            let t = g.scale(v, 3.0);
            g.sub(t, v)
        });
    }

    #[test]
    fn matrix_ops() {
        let w = array![[0.2, -0.1], [0.4, 0.3], [-0.5, 0.7]];
        check(x(), move |g, v| {
            let w = g.input(w.clone());
            let y = g.matmul(v, w);
            g.tanh(y)
        });
        check(x(), |g, v| {
            let y = g.matmul_t(v, v);
            g.sigmoid(y)
        });
        check(x(), |g, v| {
            let r = g.slice_rows(v, 1, 1);
            let y = g.add_row(v, r);
            g.tanh(y)
        });
    }

    #[test]
    fn structural_ops() {
        let w = array![[1.0, -2.0, 0.5], [0.3, 0.2, -1.0], [0.7, 0.1, 0.4], [-0.6, 0.8, 0.9]];
        let weighted = move |g: &mut Graph, y: Var| {
            let w = g.input(w.clone());
            g.mul(y, w)
        };
        check(x(), move |g, v| {
            let y = g.softmax_rows(v);
            weighted(g, y)
        });
        check(x(), |g, v| {
            let a = g.shift(v, 1);
            let b = g.shift(v, -2);
            let c = g.concat_cols(&[a, b, v]);
            g.tanh(c)
        });
        check(x(), |g, v| {
            let a = g.slice_cols(v, 1, 2);
            let b = g.slice_rows(v, 0, 2);
            let b = g.slice_cols(b, 0, 2);
            let c = g.concat_rows(&[a, b]);
            g.tanh(c)
        });
        check(x(), |g, v| {
            let p = g.max_pool2(v);
            let u = g.upsample2(p);
            let m = g.mul(u, v);
            let padded = g.pad_rows(m, 6);
            g.tanh(padded)
        });
        check(x(), |g, v| g.gather_rows(v, &[3, 0, 3, 1]));
    }

    #[test]
    fn losses() {
        check(x(), |g, v| g.cross_entropy(v, &[0, 2, 1, 1]));
        check(x(), |g, v| {
            let a = g.input(array![[0.1, -0.3, 0.2], [0.5, 0.0, -0.2], [0.3, 0.3, 0.1]]);
            let s0 = g.input(array![[0.1, 0.2, -0.1]]);
            let s1 = g.input(array![[-0.2, 0.0, 0.4]]);
            g.crf_nll(v, a, s0, s1, None, &[0, 2, 2, 1]).unwrap()
        });
    }

    #[test]
    fn params_enter_once() {
        let mut store = ParamStore::new();
        let id = store.add("w", array![[2.0]]);
        let mut g = Graph::new(&store);
        let a = g.param(id);
        let b = g.param(id);
        assert_eq!(a, b);
        let y = g.mul(a, b);
        let grads = g.backward(y);
        assert_eq!(grads.param(id).unwrap()[[0, 0]], 4.0);
    }
}
