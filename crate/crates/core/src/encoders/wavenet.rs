use rand::Rng;

use crate::encoders::cnn::conv1d;
use crate::encoders::Encoder;
use crate::graph::{Graph, ParamId, ParamStore, Var};

/// Positions one output can see in one direction.
///
/// Dilated stacks double the dilation each layer (`1, 2, 4, …`), giving
/// `(k−1)(2^n−1)+1`, i.e. `2^n` for `k = 2`; plain stacks grow by `k−1` per
/// layer.
pub fn receptive_field(kernel: usize, layers: u32, dilated: bool) -> usize {
    let k = kernel.max(1);
    if dilated {
        (k - 1) * ((1usize << layers) - 1) + 1
    } else {
        layers as usize * (k - 1) + 1
    }
}

#[derive(Clone, Debug)]
struct Layer {
    dilation: usize,
    fwd_weight: ParamId,
    fwd_bias: ParamId,
    bwd_weight: ParamId,
    bwd_bias: ParamId,
    mix_weight: ParamId,
    mix_bias: ParamId,
    residual: bool,
}

/// Bidirectional dilated convolutions with width-2 kernels.
///
/// Layer `l` (from 1) has dilation `2^(l−1)`; its forward branch reads
/// `t−d, t`, its backward branch `t, t+d`. The branches are concatenated,
/// mixed by a width-1 convolution, passed through `tanh`, and added to the
/// layer input when the widths agree.
#[derive(Clone, Debug)]
pub struct DilatedConvStack {
    layers: Vec<Layer>,
    channels: usize,
}

impl DilatedConvStack {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        channels: usize,
        n_layers: usize,
        residual: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                let c_in = if l == 0 { input } else { channels };
                let p = format!("{prefix}.layer{l}");
                Layer {
                    dilation: 1 << l,
                    fwd_weight: store.add_uniform(format!("{p}.fwd.weight"), 2 * c_in, channels, 2 * c_in, rng),
                    fwd_bias: store.add_uniform(format!("{p}.fwd.bias"), 1, channels, 2 * c_in, rng),
                    bwd_weight: store.add_uniform(format!("{p}.bwd.weight"), 2 * c_in, channels, 2 * c_in, rng),
                    bwd_bias: store.add_uniform(format!("{p}.bwd.bias"), 1, channels, 2 * c_in, rng),
                    mix_weight: store.add_uniform(format!("{p}.mix.weight"), 2 * channels, channels, 2 * channels, rng),
                    mix_bias: store.add_uniform(format!("{p}.mix.bias"), 1, channels, 2 * channels, rng),
                    residual: residual && c_in == channels,
                }
            })
            .collect();
        DilatedConvStack { layers, channels }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Furthest input offset, in either direction, reaching one output.
    pub fn reach(&self) -> usize {
        self.layers.iter().map(|l| l.dilation).sum()
    }
}

impl Encoder for DilatedConvStack {
    fn output_dim(&self) -> usize {
        self.channels
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let mut h = x;
        for layer in &self.layers {
            let d = layer.dilation as isize;
            let (fw, fb) = (g.param(layer.fwd_weight), g.param(layer.fwd_bias));
            let (bw, bb) = (g.param(layer.bwd_weight), g.param(layer.bwd_bias));
            let (mw, mb) = (g.param(layer.mix_weight), g.param(layer.mix_bias));
            let fwd = conv1d(g, h, &[-d, 0], fw, fb);
            let bwd = conv1d(g, h, &[0, d], bw, bb);
            let both = g.concat_cols(&[fwd, bwd]);
            let mixed = g.affine(both, mw, mb);
            let out = g.tanh(mixed);
            h = if layer.residual { g.add(h, out) } else { out };
        }
        h
    }
}
