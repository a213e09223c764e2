use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, ParamId, ParamStore, Var};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
/// Separates question from passage in reading-comprehension inputs.
pub const SEP: usize = 2;
const RESERVED: usize = 3;

/// Character vocabulary with reserved `PAD`, `UNK` and `SEP` ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct Vocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl From<Vec<char>> for Vocab {
    fn from(chars: Vec<char>) -> Self {
        let index = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i + RESERVED))
            .collect();
        Vocab { chars, index }
    }
}

impl From<Vocab> for Vec<char> {
    fn from(v: Vocab) -> Self {
        v.chars
    }
}

impl Vocab {
    /// Keeps characters seen at least `min_freq` times, plus every character
    /// of `always`. Ids follow code-point order.
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
        always: &[&str],
    ) -> Self {
        let mut counts: BTreeMap<char, usize> = BTreeMap::new();
        for text in texts {
            for c in text.chars() {
                *counts.entry(c).or_default() += 1;
            }
        }
        for text in always {
            for c in text.chars() {
                counts.insert(c, usize::MAX);
            }
        }
        let chars = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_freq)
            .map(|(c, _)| c)
            .collect::<Vec<_>>();
        Vocab::from(chars)
    }

    pub fn len(&self) -> usize {
        self.chars.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        text.chars().map(|c| self.id(c)).collect()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Trainable `V×d` lookup table.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub weights: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParamStore, vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let weights = store.add_uniform("embedding", vocab_size, dim, dim, rng);
        Embedding { weights, dim }
    }

    pub fn forward(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let table = g.param(self.weights);
        g.gather_rows(table, ids)
    }
}
