//! Linear-chain conditional random field over a generic label set.
//!
//! A tag sequence `y` scores
//! `start[y0] + Σ_t e[t][y_t] + Σ_{t≥1} A[y_{t-1}][y_t] + stop[y_{T-1}]`.
//! All lattice computations run in log space.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::corpus::{Tag, LABEL_COUNT};
use crate::error::{Error, Result};

/// Transition, start and stop scores.
///
/// `allowed`, when present, disables transitions (and starts) whose entry is
/// `false`; they contribute a score of −∞ while the stored values stay finite.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfParams {
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub stop: Array1<f64>,
    pub allowed: Option<Mask>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub transitions: Array2<bool>,
    pub start: Array1<bool>,
}

impl Mask {
    /// BIO constraints over the 7-label set: `I-x` may only follow `B-x` or
    /// `I-x`, and may not open a sequence.
    pub fn bio() -> Mask {
        let mut transitions = Array2::from_elem((LABEL_COUNT, LABEL_COUNT), true);
        let mut start = Array1::from_elem(LABEL_COUNT, true);
        for to in Tag::all().filter(|t| t.is_inside()) {
            start[to.index()] = false;
            for from in Tag::all() {
                transitions[[from.index(), to.index()]] = from.kind() == to.kind();
            }
        }
        Mask { transitions, start }
    }
}

impl CrfParams {
    pub fn zeros(labels: usize) -> Self {
        CrfParams {
            transitions: Array2::zeros((labels, labels)),
            start: Array1::zeros(labels),
            stop: Array1::zeros(labels),
            allowed: None,
        }
    }

    pub fn labels(&self) -> usize {
        self.start.len()
    }

    pub fn with_mask(mut self, mask: Mask) -> Self {
        self.allowed = Some(mask);
        self
    }

    fn trans(&self, i: usize, j: usize) -> f64 {
        match &self.allowed {
            Some(m) if !m.transitions[[i, j]] => f64::NEG_INFINITY,
            _ => self.transitions[[i, j]],
        }
    }

    fn start_score(&self, j: usize) -> f64 {
        match &self.allowed {
            Some(m) if !m.start[j] => f64::NEG_INFINITY,
            _ => self.start[j],
        }
    }

    fn check(&self, emissions: &ArrayView2<f64>) -> Result<()> {
        let l = self.labels();
        if l == 0 || self.transitions.dim() != (l, l) || self.stop.len() != l {
            return Err(Error::InvalidInput("inconsistent CRF parameter shapes".into()));
        }
        if emissions.nrows() == 0 || emissions.ncols() != l {
            return Err(Error::InvalidInput(format!(
                "emissions must be T×{l} with T ≥ 1, got {:?}",
                emissions.dim()
            )));
        }
        Ok(())
    }
}

/// Emission scores plus an optional gold sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct CrfInstance {
    pub emissions: Array2<f64>,
    pub tags: Option<Vec<usize>>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn score_sequence(
    emissions: ArrayView2<f64>,
    params: &CrfParams,
    tags: &[usize],
) -> Result<f64> {
    params.check(&emissions)?;
    let l = params.labels();
    if tags.len() != emissions.nrows() {
        return Err(Error::InvalidInput(format!(
            "tag sequence length {} != emission length {}",
            tags.len(),
            emissions.nrows()
        )));
    }
    if let Some(&bad) = tags.iter().find(|&&y| y >= l) {
        return Err(Error::InvalidInput(format!("label {bad} out of range (L = {l})")));
    }
    let mut s = params.start_score(tags[0]) + params.stop[tags[tags.len() - 1]];
    for (t, &y) in tags.iter().enumerate() {
        s += emissions[[t, y]];
        if t > 0 {
            s += params.trans(tags[t - 1], y);
        }
    }
    Ok(s)
}

/// Forward log-messages: `alpha[t][j]` is the log-sum over prefixes ending
/// in label `j` at position `t`, emissions up to `t` included.
fn forward(emissions: &ArrayView2<f64>, params: &CrfParams) -> Array2<f64> {
    let (t_len, l) = emissions.dim();
    let mut alpha = Array2::zeros((t_len, l));
    for j in 0..l {
        alpha[[0, j]] = params.start_score(j) + emissions[[0, j]];
    }
    for t in 1..t_len {
        for j in 0..l {
            let prev = alpha.row(t - 1);
            alpha[[t, j]] = log_sum_exp((0..l).map(|i| prev[i] + params.trans(i, j)))
                + emissions[[t, j]];
        }
    }
    alpha
}

/// Backward log-messages: `beta[t][i]` sums over suffixes after position `t`
/// given label `i` at `t`, stop score included.
fn backward(emissions: &ArrayView2<f64>, params: &CrfParams) -> Array2<f64> {
    let (t_len, l) = emissions.dim();
    let mut beta = Array2::zeros((t_len, l));
    for i in 0..l {
        beta[[t_len - 1, i]] = params.stop[i];
    }
    for t in (0..t_len - 1).rev() {
        for i in 0..l {
            let next = beta.row(t + 1);
            beta[[t, i]] = log_sum_exp(
                (0..l).map(|j| params.trans(i, j) + emissions[[t + 1, j]] + next[j]),
            );
        }
    }
    beta
}

pub fn log_partition(emissions: ArrayView2<f64>, params: &CrfParams) -> Result<f64> {
    params.check(&emissions)?;
    let alpha = forward(&emissions, params);
    let last = alpha.row(alpha.nrows() - 1);
    Ok(log_sum_exp((0..params.labels()).map(|j| last[j] + params.stop[j])))
}

/// Posterior marginals of the model.
#[derive(Clone, Debug)]
pub struct Marginals {
    pub log_z: f64,
    /// `nodes[t][y] = P(y_t = y)`.
    pub nodes: Array2<f64>,
    /// `edges[i][j] = Σ_t P(y_{t-1} = i, y_t = j)`.
    pub edges: Array2<f64>,
}

pub fn marginals(emissions: ArrayView2<f64>, params: &CrfParams) -> Result<Marginals> {
    params.check(&emissions)?;
    let (t_len, l) = emissions.dim();
    let alpha = forward(&emissions, params);
    let beta = backward(&emissions, params);
    let log_z = log_sum_exp((0..l).map(|j| alpha[[t_len - 1, j]] + params.stop[j]));
    let nodes = (&alpha + &beta).mapv(|x| (x - log_z).exp());
    let mut edges = Array2::zeros((l, l));
    for t in 1..t_len {
        for i in 0..l {
            for j in 0..l {
                let lp = alpha[[t - 1, i]]
                    + params.trans(i, j)
                    + emissions[[t, j]]
                    + beta[[t, j]]
                    - log_z;
                edges[[i, j]] += lp.exp();
            }
        }
    }
    Ok(Marginals {
        log_z,
        nodes,
        edges,
    })
}

/// Highest-scoring sequence and its score. Ties go to the smallest label at
/// the final position and at every backtracking step.
pub fn viterbi(emissions: ArrayView2<f64>, params: &CrfParams) -> Result<(Vec<usize>, f64)> {
    params.check(&emissions)?;
    let (t_len, l) = emissions.dim();
    let mut delta = Array2::zeros((t_len, l));
    let mut back = Array2::<usize>::zeros((t_len, l));
    for j in 0..l {
        delta[[0, j]] = params.start_score(j) + emissions[[0, j]];
    }
    for t in 1..t_len {
        for j in 0..l {
            let mut best = (0, f64::NEG_INFINITY);
            for i in 0..l {
                let s = delta[[t - 1, i]] + params.trans(i, j);
                if s > best.1 {
                    best = (i, s);
                }
            }
            back[[t, j]] = best.0;
            delta[[t, j]] = best.1 + emissions[[t, j]];
        }
    }
    let mut last = (0, f64::NEG_INFINITY);
    for j in 0..l {
        let s = delta[[t_len - 1, j]] + params.stop[j];
        if s > last.1 {
            last = (j, s);
        }
    }
    let mut path = vec![last.0; t_len];
    for t in (1..t_len).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    Ok((path, last.1))
}

/// Negative log-likelihood of a gold sequence and its gradients.
#[derive(Clone, Debug)]
pub struct CrfGradient {
    pub loss: f64,
    pub d_emissions: Array2<f64>,
    pub d_transitions: Array2<f64>,
    pub d_start: Array1<f64>,
    pub d_stop: Array1<f64>,
}

/// Loss `log Z − score(gold)`; each gradient is expected minus observed
/// feature counts.
pub fn nll_and_gradient(
    emissions: ArrayView2<f64>,
    params: &CrfParams,
    tags: &[usize],
) -> Result<CrfGradient> {
    let gold = score_sequence(emissions, params, tags)?;
    let m = marginals(emissions, params)?;
    let t_len = emissions.nrows();
    let mut d_emissions = m.nodes.clone();
    let mut d_transitions = m.edges;
    let mut d_start = m.nodes.row(0).to_owned();
    let mut d_stop = m.nodes.row(t_len - 1).to_owned();
    for (t, &y) in tags.iter().enumerate() {
        d_emissions[[t, y]] -= 1.0;
        if t > 0 {
            d_transitions[[tags[t - 1], y]] -= 1.0;
        }
    }
    d_start[tags[0]] -= 1.0;
    d_stop[tags[t_len - 1]] -= 1.0;
    Ok(CrfGradient {
        loss: m.log_z - gold,
        d_emissions,
        d_transitions,
        d_start,
        d_stop,
    })
}

/// Upper bound on `L^T` for the enumeration oracles.
pub const ENUMERATION_LIMIT: f64 = 1e6;

fn enumerate(
    emissions: &ArrayView2<f64>,
    params: &CrfParams,
    mut visit: impl FnMut(&[usize], f64),
) -> Result<()> {
    params.check(emissions)?;
    let (t_len, l) = emissions.dim();
    let count = (l as f64).powi(t_len as i32);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            sequences: count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut tags = vec![0usize; t_len];
    loop {
        visit(&tags, score_sequence(*emissions, params, &tags)?);
        // odometer increment, position 0 fastest
        let mut pos = 0;
        loop {
            if pos == t_len {
                return Ok(());
            }
            tags[pos] += 1;
            if tags[pos] < l {
                break;
            }
            tags[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact `log Z` by summing over every sequence.
pub fn brute_force_log_partition(emissions: ArrayView2<f64>, params: &CrfParams) -> Result<f64> {
    let mut scores = Vec::new();
    enumerate(&emissions, params, |_, s| scores.push(s))?;
    Ok(log_sum_exp(scores.into_iter()))
}

/// Exhaustive argmax with the same tie rule as [`viterbi`]: among optimal
/// sequences, the smallest last label, then the smallest label before it.
pub fn brute_force_decode(
    emissions: ArrayView2<f64>,
    params: &CrfParams,
) -> Result<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    enumerate(&emissions, params, |tags, s| {
        let better = match &best {
            None => true,
            Some((b, bs)) => s > *bs || (s == *bs && tags.iter().rev().lt(b.iter().rev())),
        };
        if better {
            best = Some((tags.to_vec(), s));
        }
    })?;
    Ok(best.expect("at least one sequence"))
}

/// Tags decoded from per-position argmax of emissions (softmax decoders).
pub fn argmax_rows(emissions: ArrayView2<f64>) -> Vec<usize> {
    emissions
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

/// Whether the BIO label `to` may follow `from` under [`Mask::bio`].
pub fn bio_transition_allowed(from: Tag, to: Tag) -> bool {
    !to.is_inside() || from.kind() == to.kind()
}
