mod common;

use common::suites::{self, CRF_TOL, ENCODER_TOL};

fn assert_within((name, err): suites::GradCase, tol: f64) {
    assert!(err <= tol, "{name}: relative gradient error {err:.3e} exceeds {tol:.0e}");
}

#[test]
fn embedding_gradients() {
    assert_within(suites::embedding_case(), ENCODER_TOL);
}

#[test]
fn bilstm_gradients() {
    assert_within(suites::bilstm_case(), ENCODER_TOL);
}

#[test]
fn cnn_gradients() {
    assert_within(suites::cnn_case(), ENCODER_TOL);
}

#[test]
fn attention_gradients() {
    assert_within(suites::attention_case(), ENCODER_TOL);
}

#[test]
fn wavenet_gradients() {
    assert_within(suites::wavenet_case(), ENCODER_TOL);
}

#[test]
fn unet_gradients() {
    assert_within(suites::unet_case(), ENCODER_TOL);
}

#[test]
fn attention_lstm_gradients() {
    assert_within(suites::attention_lstm_case(), ENCODER_TOL);
}

#[test]
fn crf_gradients() {
    assert_within(suites::crf_case(false), CRF_TOL);
}

#[test]
fn masked_crf_gradients() {
    assert_within(suites::crf_case(true), CRF_TOL);
}

#[test]
fn checker_flags_a_detached_gradient() {
    // the second factor is re-entered as a constant, so reverse mode misses
    // half of d(x²)/dx and the checker has to notice
    let store = oncoie::graph::ParamStore::new();
    let x = common::normal_matrix(&mut common::rng(3), 2, 2);
    let err = common::grad_check(&store, &[x], &|g, v| {
        let detached = g.input(g.value(v[0]).clone());
        let sq = g.mul(v[0], detached);
        g.sum_all(sq)
    });
    assert!(err > 0.1, "checker missed a broken gradient ({err:.3e})");
}

