use rand::Rng;

use crate::encoders::Encoder;
use crate::graph::{Graph, ParamId, ParamStore, Var};

/// Tap offsets of a same-length convolution of width `w`: the window pads
/// `⌈(w−1)/2⌉` positions on the left and `⌊(w−1)/2⌋` on the right.
pub fn same_padding_taps(width: usize) -> Vec<isize> {
    let left = width.saturating_sub(1).div_ceil(2) as isize;
    (0..width as isize).map(|k| k - left).collect()
}

/// 1-D convolution as a matrix product over shifted copies of `x`.
/// `weight` is `(taps·d)×C`, rows grouped by tap; positions outside the
/// sequence read zeros.
pub fn conv1d(g: &mut Graph, x: Var, taps: &[isize], weight: Var, bias: Var) -> Var {
    let shifted: Vec<Var> = taps.iter().map(|&k| if k == 0 { x } else { g.shift(x, k) }).collect();
    let window = if shifted.len() == 1 { shifted[0] } else { g.concat_cols(&shifted) };
    g.affine(window, weight, bias)
}

#[derive(Clone, Debug)]
struct Branch {
    width: usize,
    weight: ParamId,
    bias: ParamId,
}

/// Parallel same-length convolutions of several widths, ReLU, then channel
/// concatenation.
#[derive(Clone, Debug)]
pub struct MultiWidthCnn {
    branches: Vec<Branch>,
    filters: usize,
}

impl MultiWidthCnn {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        widths: &[usize],
        filters: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let branches = widths
            .iter()
            .map(|&w| Branch {
                width: w,
                weight: store.add_uniform(format!("{prefix}.w{w}.weight"), w * input, filters, w * input, rng),
                bias: store.add_uniform(format!("{prefix}.w{w}.bias"), 1, filters, w * input, rng),
            })
            .collect();
        MultiWidthCnn { branches, filters }
    }

    pub fn widths(&self) -> Vec<usize> {
        self.branches.iter().map(|b| b.width).collect()
    }

    pub fn branch_params(&self, index: usize) -> (ParamId, ParamId) {
        (self.branches[index].weight, self.branches[index].bias)
    }
}

impl Encoder for MultiWidthCnn {
    fn output_dim(&self) -> usize {
        self.branches.len() * self.filters
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let outs: Vec<Var> = self
            .branches
            .iter()
            .map(|b| {
                let (w, bias) = (g.param(b.weight), g.param(b.bias));
                let y = conv1d(g, x, &same_padding_taps(b.width), w, bias);
                g.relu(y)
            })
            .collect();
        g.concat_cols(&outs)
    }
}
