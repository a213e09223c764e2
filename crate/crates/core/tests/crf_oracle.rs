mod common;

use ndarray::Array2;
use oncoie::corpus::{Tag, TagSequence};
use oncoie::crf::{self, CrfParams, Mask};
use rand::Rng;

use common::{random_crf, rng, suites};

#[test]
fn forward_and_viterbi_match_enumeration() {
    let outcome = suites::crf_oracle_suite();
    assert!(outcome.is_ok(), "{outcome:?}");
}

/// Exhaustive marginals: `P(y_t = j)` summed over every sequence.
fn brute_marginals(e: &Array2<f64>, p: &CrfParams) -> Array2<f64> {
    let (t_len, l) = e.dim();
    let log_z = crf::brute_force_log_partition(e.view(), p).unwrap();
    let mut out = Array2::zeros((t_len, l));
    let mut tags = vec![0usize; t_len];
    'outer: loop {
        let w = (crf::score_sequence(e.view(), p, &tags).unwrap() - log_z).exp();
        for (t, &y) in tags.iter().enumerate() {
            out[[t, y]] += w;
        }
        for pos in 0..t_len {
            tags[pos] += 1;
            if tags[pos] < l {
                continue 'outer;
            }
            tags[pos] = 0;
        }
        break;
    }
    out
}

#[test]
fn node_marginals_match_enumeration() {
    let mut r = rng(5);
    for _ in 0..50 {
        let t_len = r.gen_range(1..=5);
        let l = r.gen_range(1..=4);
        let (e, p) = random_crf(&mut r, t_len, l);
        let m = crf::marginals(e.view(), &p).unwrap();
        let oracle = brute_marginals(&e, &p);
        for (a, b) in m.nodes.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn ties_follow_the_documented_order() {
    // integer scores on few labels make tied optima common
    let mut r = rng(6);
    let mut ties = 0;
    for _ in 0..300 {
        let t_len = r.gen_range(1..=5);
        let l = r.gen_range(2..=3);
        let e = Array2::from_shape_fn((t_len, l), |_| r.gen_range(-1..=1) as f64);
        let mut p = CrfParams::zeros(l);
        p.transitions = Array2::from_shape_fn((l, l), |_| r.gen_range(-1..=1) as f64);
        if !suites::unique_optimum(&e, &p) {
            ties += 1;
        }
        let (path, score) = crf::viterbi(e.view(), &p).unwrap();
        let (oracle, best) = crf::brute_force_decode(e.view(), &p).unwrap();
        assert_eq!(score, best);
        assert_eq!(path, oracle);
    }
    assert!(ties > 50, "only {ties} tied instances generated");
}

#[test]
fn masked_decoding_is_well_formed_and_optimal() {
    let mut r = rng(7);
    for _ in 0..40 {
        let t_len = r.gen_range(1..=5);
        let (e, p) = random_crf(&mut r, t_len, 7);
        let p = p.with_mask(Mask::bio());
        let (path, score) = crf::viterbi(e.view(), &p).unwrap();
        let tags = TagSequence(path.iter().map(|&i| Tag::from_index(i).unwrap()).collect());
        assert!(tags.is_well_formed(), "{path:?}");
        let (_, best) = crf::brute_force_decode(e.view(), &p).unwrap();
        assert!((score - best).abs() < 1e-12);
        let log_z = crf::log_partition(e.view(), &p).unwrap();
        let brute = crf::brute_force_log_partition(e.view(), &p).unwrap();
        assert!((log_z - brute).abs() < 1e-8);
    }
}

#[test]
fn enumeration_refuses_large_problems() {
    let (e, p) = random_crf(&mut rng(8), 8, 7);
    assert!(crf::brute_force_log_partition(e.view(), &p).is_err());
}
