use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::cnn::{conv1d, same_padding_taps};
use crate::encoders::Encoder;
use crate::graph::{Graph, ParamId, ParamStore, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnetConfig {
    /// Number of down/up levels.
    pub depth: usize,
    /// Channels at the top level; level `i` uses `base · 2^i`.
    pub base_channels: usize,
    pub kernel: usize,
}

impl Default for UnetConfig {
    fn default() -> Self {
        UnetConfig {
            depth: 2,
            base_channels: 32,
            kernel: 3,
        }
    }
}

impl UnetConfig {
    /// Internal length: `t_len` rounded up to a multiple of `2^depth`.
    pub fn padded_len(&self, t_len: usize) -> usize {
        let m = 1 << self.depth;
        t_len.div_ceil(m) * m
    }
}

#[derive(Clone, Debug)]
struct Conv {
    weight: ParamId,
    bias: ParamId,
}

impl Conv {
    fn new(store: &mut ParamStore, name: &str, c_in: usize, c_out: usize, k: usize, rng: &mut impl Rng) -> Self {
        Conv {
            weight: store.add_uniform(format!("{name}.weight"), k * c_in, c_out, k * c_in, rng),
            bias: store.add_uniform(format!("{name}.bias"), 1, c_out, k * c_in, rng),
        }
    }

    fn relu(&self, g: &mut Graph, x: Var, taps: &[isize]) -> Var {
        let (w, b) = (g.param(self.weight), g.param(self.bias));
        let y = conv1d(g, x, taps, w, b);
        g.relu(y)
    }
}

/// One-dimensional U-net: conv + max-pool on the way down, nearest
/// upsampling + skip concatenation + conv on the way up.
#[derive(Clone, Debug)]
pub struct UnetEncoder {
    cfg: UnetConfig,
    down: Vec<Conv>,
    bottom: Conv,
    up: Vec<Conv>,
}

impl UnetEncoder {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, cfg: &UnetConfig, rng: &mut impl Rng) -> Self {
        let k = cfg.kernel;
        let ch = |level: usize| cfg.base_channels << level;
        let mut down = Vec::new();
        let mut c_in = input;
        for level in 0..cfg.depth {
            down.push(Conv::new(store, &format!("{prefix}.down{level}"), c_in, ch(level), k, rng));
            c_in = ch(level);
        }
        let bottom = Conv::new(store, &format!("{prefix}.bottom"), c_in, ch(cfg.depth), k, rng);
        let up = (0..cfg.depth)
            .map(|level| {
                // input: upsampled level+1 features concatenated with the skip
                let c = ch(level + 1) + ch(level);
                Conv::new(store, &format!("{prefix}.up{level}"), c, ch(level), k, rng)
            })
            .collect();
        UnetEncoder {
            cfg: cfg.clone(),
            down,
            bottom,
            up,
        }
    }

    pub fn config(&self) -> &UnetConfig {
        &self.cfg
    }
}

impl Encoder for UnetEncoder {
    fn output_dim(&self) -> usize {
        self.cfg.base_channels
    }

    fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let t_len = g.shape(x).0;
        let taps = same_padding_taps(self.cfg.kernel);
        let padded_len = self.cfg.padded_len(t_len);
        let mut h = if padded_len == t_len { x } else { g.pad_rows(x, padded_len) };
        let mut skips = Vec::with_capacity(self.cfg.depth);
        for conv in &self.down {
            let y = conv.relu(g, h, &taps);
            skips.push(y);
            h = g.max_pool2(y);
        }
        h = self.bottom.relu(g, h, &taps);
        for (conv, skip) in self.up.iter().zip(skips).rev() {
            let u = g.upsample2(h);
            let joined = g.concat_cols(&[u, skip]);
            h = conv.relu(g, joined, &taps);
        }
        if padded_len == t_len {
            h
        } else {
            g.slice_rows(h, 0, t_len)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn padding_arithmetic() {
        let cfg = UnetConfig {
            depth: 2,
            ..Default::default()
        };
        assert_eq!(cfg.padded_len(13), 16);
        assert_eq!(cfg.padded_len(16), 16);
        assert_eq!(cfg.padded_len(1), 4);
        let flat = UnetConfig {
            depth: 0,
            ..Default::default()
        };
        assert_eq!(flat.padded_len(13), 13);
    }

    #[test]
    fn output_length_is_input_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for depth in 0..4 {
            let cfg = UnetConfig {
                depth,
                base_channels: 3,
                kernel: 3,
            };
            let mut store = ParamStore::new();
            let unet = UnetEncoder::new(&mut store, "u", 2, &cfg, &mut rng);
            for t in [1, 2, 5, 8, 13] {
                let mut g = Graph::new(&store);
                let x = g.input(Matrix::from_elem((t, 2), 0.5));
                let y = unet.forward(&mut g, x);
                assert_eq!(g.shape(y), (t, 3), "depth {depth} T {t}");
            }
        }
    }
}
