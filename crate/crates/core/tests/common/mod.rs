//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use oncoie::corpus::{generate_corpus, AttributeType, Report, Span, SplitConfig, SyntheticSpec, DEFAULT_KEYWORDS};
use oncoie::crf::CrfParams;
use oncoie::graph::{Graph, Matrix, ParamStore, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a − n| / max(|a|, |n|, 1e-2)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2)
}

pub fn normal_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// Scalar loss `Σ out ⊙ R` for a fixed random `R`, so every output entry
/// contributes a distinct weight.
pub fn project(g: &mut Graph, out: Var, seed: u64) -> Var {
    let (r, c) = g.shape(out);
    let weights = g.input(normal_matrix(&mut rng(seed), r, c));
    let prod = g.mul(out, weights);
    g.sum_all(prod)
}

/// Largest relative error between reverse-mode and central-difference
/// gradients, over every input entry and every parameter entry.
pub fn grad_check(
    store: &ParamStore,
    inputs: &[Matrix],
    build: &dyn Fn(&mut Graph, &[Var]) -> Var,
) -> f64 {
    let eval = |store: &ParamStore, inputs: &[Matrix]| -> f64 {
        let mut g = Graph::new(store);
        let vars: Vec<Var> = inputs.iter().map(|m| g.input(m.clone())).collect();
        let out = build(&mut g, &vars);
        g.value(out)[[0, 0]]
    };
    let mut g = Graph::new(store);
    let vars: Vec<Var> = inputs.iter().map(|m| g.input(m.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out);

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let zero = Matrix::zeros(input.dim());
        let analytic = grads.of(vars[k]).unwrap_or(&zero);
        for idx in ndarray::indices(input.dim()) {
            let mut plus = inputs.to_vec();
            let mut minus = inputs.to_vec();
            plus[k][idx] += FD_STEP;
            minus[k][idx] -= FD_STEP;
            let numeric = (eval(store, &plus) - eval(store, &minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[idx], numeric));
        }
    }
    for id in store.ids() {
        let zero = Matrix::zeros(store.get(id).dim());
        let analytic = grads.param(id).unwrap_or(&zero);
        for idx in ndarray::indices(store.get(id).dim()) {
            let mut plus = store.clone();
            let mut minus = store.clone();
            plus.get_mut(id)[idx] += FD_STEP;
            minus.get_mut(id)[idx] -= FD_STEP;
            let numeric = (eval(&plus, inputs) - eval(&minus, inputs)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[idx], numeric));
        }
    }
    worst
}

/// Emissions and CRF parameters with i.i.d. standard-normal scores.
pub fn random_crf(rng: &mut impl Rng, t_len: usize, labels: usize) -> (Array2<f64>, CrfParams) {
    let emissions = normal_matrix(rng, t_len, labels);
    let mut params = CrfParams::zeros(labels);
    params.transitions = normal_matrix(rng, labels, labels);
    params.start = Array1::from_shape_fn(labels, |_| StandardNormal.sample(rng));
    params.stop = Array1::from_shape_fn(labels, |_| StandardNormal.sample(rng));
    (emissions, params)
}

/// Random sorted, non-overlapping, non-empty spans inside `0..len`.
pub fn random_spans(rng: &mut impl Rng, len: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < len {
        pos += rng.gen_range(0..4);
        if pos >= len {
            break;
        }
        let end = (pos + rng.gen_range(1..5)).min(len);
        let kind = AttributeType::from_index(rng.gen_range(0..3)).unwrap();
        spans.push(Span::new(pos, end, kind));
        pos = end;
    }
    spans
}

/// Synthetic corpus after keyword filtering and section splitting; only
/// kept reports are returned.
pub fn kept_corpus(seed: u64, n: usize) -> Vec<Report> {
    let split = SplitConfig::default();
    generate_corpus(&SyntheticSpec::new(seed, n))
        .unwrap()
        .into_iter()
        .filter_map(|mut r| r.preprocess(&DEFAULT_KEYWORDS, &split).then_some(r))
        .collect()
}

/// One status line for the acceptance summary, written past the test
/// harness's output capture so it shows for passing tests too.
pub fn report_line(criterion: u32, name: &str, outcome: &Result<String, String>) {
    use std::io::Write;
    let line = match outcome {
        Ok(detail) => format!("[PASS] criterion {criterion}: {name} ({detail})\n"),
        Err(detail) => format!("[FAIL] criterion {criterion}: {name} ({detail})\n"),
    };
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

pub mod suites;
pub mod pipeline;
