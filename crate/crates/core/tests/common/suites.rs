//! Criterion-sized checks shared by the topical tests and the acceptance
//! summary. Each returns a short detail string on success.

use std::time::Instant;

use oncoie::crf::{self, Mask};
use oncoie::encoders::{
    AttentionLstm, BiLstm, DilatedConvStack, Embedding, Encoder, MultiHeadAttention, MultiWidthCnn,
    UnetConfig, UnetEncoder,
};
use oncoie::graph::ParamStore;

use super::{grad_check, normal_matrix, project, random_crf, rng};

pub const ENCODER_TOL: f64 = 1e-4;
pub const CRF_TOL: f64 = 1e-6;

/// Name and worst relative gradient error of one small-shape case.
pub type GradCase = (&'static str, f64);

pub fn embedding_case() -> GradCase {
    let mut store = ParamStore::new();
    let emb = Embedding::new(&mut store, 6, 3, &mut rng(1));
    let ids = [0, 2, 2, 5, 1];
    let err = grad_check(&store, &[], &|g, _| {
        let out = emb.forward(g, &ids);
        project(g, out, 11)
    });
    ("embedding", err)
}

fn encoder_case(name: &'static str, store: &ParamStore, enc: &dyn Encoder, t_len: usize, input: usize) -> GradCase {
    let x = normal_matrix(&mut rng(2), t_len, input);
    let err = grad_check(store, &[x], &|g, v| {
        let out = enc.forward(g, v[0]);
        project(g, out, 12)
    });
    (name, err)
}

pub fn bilstm_case() -> GradCase {
    let mut store = ParamStore::new();
    let enc = BiLstm::new(&mut store, "bilstm", 3, 2, &mut rng(3));
    encoder_case("bilstm", &store, &enc, 4, 3)
}

pub fn cnn_case() -> GradCase {
    let mut store = ParamStore::new();
    let enc = MultiWidthCnn::new(&mut store, "cnn", 3, &[2, 3, 4], 2, &mut rng(4));
    encoder_case("cnn", &store, &enc, 5, 3)
}

pub fn attention_case() -> GradCase {
    let mut store = ParamStore::new();
    let enc = MultiHeadAttention::new(&mut store, "mha", 4, 2, 2, &mut rng(5));
    encoder_case("multi-head attention", &store, &enc, 4, 4)
}

pub fn wavenet_case() -> GradCase {
    let mut store = ParamStore::new();
    let enc = DilatedConvStack::new(&mut store, "wavenet", 3, 3, 2, true, &mut rng(6));
    encoder_case("wavenet", &store, &enc, 6, 3)
}

pub fn unet_case() -> GradCase {
    let mut store = ParamStore::new();
    let cfg = UnetConfig {
        depth: 2,
        base_channels: 2,
        kernel: 3,
    };
    let enc = UnetEncoder::new(&mut store, "unet", 3, &cfg, &mut rng(7));
    encoder_case("ucnn", &store, &enc, 5, 3)
}

pub fn attention_lstm_case() -> GradCase {
    let mut store = ParamStore::new();
    let enc = AttentionLstm::new(&mut store, "attn_lstm", 3, 2, 2, 3, &mut rng(8)).unwrap();
    encoder_case("attention-lstm", &store, &enc, 4, 3)
}

/// CRF NLL through the graph node, with gradients for emissions,
/// transitions, start and stop. `masked` applies the BIO restriction.
pub fn crf_case(masked: bool) -> GradCase {
    let labels = if masked { 7 } else { 4 };
    let (emissions, params) = random_crf(&mut rng(9), 5, labels);
    let mut store = ParamStore::new();
    let trans = store.add("crf.transitions", params.transitions.clone());
    let start = store.add("crf.start", params.start.clone().insert_axis(ndarray::Axis(0)));
    let stop = store.add("crf.stop", params.stop.clone().insert_axis(ndarray::Axis(0)));
    let mask = masked.then(Mask::bio);
    // a well-formed gold path
    let tags: Vec<usize> = if masked { vec![0, 1, 2, 0, 5] } else { vec![1, 3, 0, 0, 2] };
    let err = grad_check(&store, &[emissions], &|g, v| {
        let (t, s, e) = (g.param(trans), g.param(start), g.param(stop));
        g.crf_nll(v[0], t, s, e, mask.as_ref(), &tags).unwrap()
    });
    (if masked { "crf nll (bio mask)" } else { "crf nll" }, err)
}

pub fn encoder_cases() -> Vec<GradCase> {
    vec![
        embedding_case(),
        bilstm_case(),
        cnn_case(),
        attention_case(),
        wavenet_case(),
        unet_case(),
        attention_lstm_case(),
    ]
}

/// Criterion 2: every case within tolerance, under a minute.
pub fn gradient_suite() -> Result<String, String> {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut worst_encoder: f64 = 0.0;
    for (name, err) in encoder_cases() {
        worst_encoder = worst_encoder.max(err);
        if !(err <= ENCODER_TOL) {
            failures.push(format!("{name} {err:.2e}"));
        }
    }
    let mut worst_crf: f64 = 0.0;
    for (name, err) in [crf_case(false), crf_case(true)] {
        worst_crf = worst_crf.max(err);
        if !(err <= CRF_TOL) {
            failures.push(format!("{name} {err:.2e}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 60.0 {
        failures.push(format!("took {secs:.1}s"));
    }
    if failures.is_empty() {
        Ok(format!("worst encoder {worst_encoder:.1e}, worst crf {worst_crf:.1e}, {secs:.1}s"))
    } else {
        Err(failures.join("; "))
    }
}

/// Criterion 1: 200 random instances against enumeration.
pub fn crf_oracle_suite() -> Result<String, String> {
    use rand::Rng;
    let started = Instant::now();
    let mut r = rng(2024);
    let (mut worst, mut unique, mut mismatches) = (0.0f64, 0, Vec::new());
    for case in 0..200 {
        let t_len = r.gen_range(1..=7);
        let labels = r.gen_range(1..=5);
        let (e, p) = random_crf(&mut r, t_len, labels);
        let forward = crf::log_partition(e.view(), &p).map_err(|x| x.to_string())?;
        let brute = crf::brute_force_log_partition(e.view(), &p).map_err(|x| x.to_string())?;
        worst = worst.max((forward - brute).abs());
        if !unique_optimum(&e, &p) {
            continue;
        }
        unique += 1;
        let (path, _) = crf::viterbi(e.view(), &p).map_err(|x| x.to_string())?;
        let (oracle, _) = crf::brute_force_decode(e.view(), &p).map_err(|x| x.to_string())?;
        if path != oracle {
            mismatches.push(case);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let detail = format!("max |logZ diff| {worst:.1e}, {unique} unique-optimum decodes, {secs:.2}s");
    if worst <= 1e-8 && mismatches.is_empty() && secs < 10.0 {
        Ok(detail)
    } else {
        Err(format!("{detail}; viterbi mismatches at {mismatches:?}"))
    }
}

/// True when the best sequence beats the runner-up by a clear margin.
pub fn unique_optimum(e: &ndarray::Array2<f64>, p: &crf::CrfParams) -> bool {
    let (t_len, l) = e.dim();
    let mut scores = Vec::with_capacity(l.pow(t_len as u32));
    let mut tags = vec![0usize; t_len];
    loop {
        scores.push(crf::score_sequence(e.view(), p, &tags).unwrap());
        let mut pos = 0;
        while pos < t_len {
            tags[pos] += 1;
            if tags[pos] < l {
                break;
            }
            tags[pos] = 0;
            pos += 1;
        }
        if pos == t_len {
            break;
        }
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.len() == 1 || scores[0] - scores[1] > 1e-9
}

/// Criterion 4: the dilated stack's dependence window on `T = 40`.
pub fn wavenet_locality() -> Result<String, String> {
    use oncoie::encoders::receptive_field;
    use oncoie::graph::Graph;
    let dilated = receptive_field(2, 3, true);
    let plain = receptive_field(2, 7, false);
    if (dilated, plain) != (8, 8) {
        return Err(format!("receptive fields {dilated} and {plain}, expected 8 and 8"));
    }
    let mut store = ParamStore::new();
    let enc = DilatedConvStack::new(&mut store, "wavenet", 4, 4, 3, true, &mut rng(40));
    let reach = enc.reach() as isize;
    let x = normal_matrix(&mut rng(41), 40, 4);
    let run = |x: &ndarray::Array2<f64>| {
        let mut g = Graph::new(&store);
        let v = g.input(x.clone());
        let out = enc.forward(&mut g, v);
        g.value(out).clone()
    };
    let base = run(&x);
    for p in [0usize, 13, 20, 39] {
        let mut moved = x.clone();
        moved.row_mut(p).mapv_inplace(|v| v + 1.0);
        let out = run(&moved);
        for t in 0..40 {
            let changed = base.row(t) != out.row(t);
            let inside = (t as isize - p as isize).abs() <= reach;
            if changed && !inside {
                return Err(format!("output {t} moved after perturbing input {p}"));
            }
            if !changed && (t as isize - p as isize).abs() == reach {
                return Err(format!("window edge {t} unaffected by input {p}"));
            }
        }
    }
    Ok(format!("fields {dilated}/{plain}, window ±{reach} on T=40"))
}

/// Criterion 5: round trips over 1000 span sets and totality over every
/// tag sequence up to length 6.
pub fn bio_suite() -> Result<String, String> {
    use oncoie::corpus::{decode_tags, encode_tags, Tag};
    use rand::Rng;
    let mut r = rng(55);
    for case in 0..1000 {
        let len = r.gen_range(0..30);
        let spans = super::random_spans(&mut r, len);
        let tags = encode_tags(&spans, len).map_err(|e| e.to_string())?;
        if !tags.is_well_formed() || decode_tags(&tags.0) != spans {
            return Err(format!("round trip failed on case {case}: {spans:?}"));
        }
    }
    let mut total = 0usize;
    for t_len in 0..=6u32 {
        for code in 0..7usize.pow(t_len) {
            let mut c = code;
            let tags: Vec<Tag> = (0..t_len)
                .map(|_| {
                    let t = Tag::from_index(c % 7).unwrap();
                    c /= 7;
                    t
                })
                .collect();
            let spans = decode_tags(&tags);
            let valid = oncoie::corpus::validate_spans(&spans, tags.len()).is_ok();
            // decoding is idempotent through a re-encode
            let again = encode_tags(&spans, tags.len()).map(|s| decode_tags(&s.0));
            if !valid || again.as_ref().ok() != Some(&spans) {
                return Err(format!("decode not total on {tags:?}"));
            }
            total += 1;
        }
    }
    Ok(format!("1000 round trips, {total} sequences decoded"))
}

/// Exhaustive `(s, e)` search, independent of the library's loop order.
pub fn answer_oracle(ps: &[f64], pe: &[f64], max_len: usize) -> Option<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for s in 0..ps.len() {
        for e in 0..pe.len() {
            if s <= e && e < s + max_len {
                pairs.push((s, e, ps[s] + pe[e]));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    pairs.first().copied()
}

/// Random simplex vector; `coarse` draws from a small grid to force ties.
pub fn random_simplex(r: &mut impl rand::Rng, t_len: usize, coarse: bool) -> Vec<f64> {
    let raw: Vec<f64> = (0..t_len)
        .map(|_| if coarse { r.gen_range(0..3) as f64 } else { r.gen::<f64>() })
        .collect();
    let sum: f64 = raw.iter().sum();
    if sum == 0.0 {
        vec![1.0 / t_len as f64; t_len]
    } else {
        raw.iter().map(|x| x / sum).collect()
    }
}

/// Criterion 8: oracle agreement, rejection monotonicity and `τ = 0`.
pub fn mrc_suite() -> Result<String, String> {
    use oncoie::mrc::{extract_answer, AnswerDecision};
    use rand::Rng;
    let mut r = rng(88);
    let taus: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    let mut rejections = vec![0usize; taus.len()];
    for case in 0..500 {
        let t_len = r.gen_range(1..=12);
        let max_len = r.gen_range(1..=t_len + 1);
        let coarse = case % 3 == 0;
        let ps = random_simplex(&mut r, t_len, coarse);
        let pe = random_simplex(&mut r, t_len, coarse);
        let (s, e, score) = answer_oracle(&ps, &pe, max_len).expect("non-empty passage");
        let tau = r.gen_range(0.0..=2.0);
        let expected = if score >= tau {
            AnswerDecision::Accept { start: s, end: e + 1, score }
        } else {
            AnswerDecision::Reject { best_score: score }
        };
        let got = extract_answer(&ps, &pe, tau, max_len);
        if got != expected {
            return Err(format!("case {case}: got {got:?}, oracle {expected:?}"));
        }
        if !extract_answer(&ps, &pe, 0.0, max_len).is_accept() {
            return Err(format!("case {case}: rejected at tau 0"));
        }
        for (i, &t) in taus.iter().enumerate() {
            if !extract_answer(&ps, &pe, t, max_len).is_accept() {
                rejections[i] += 1;
            }
        }
    }
    if rejections.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("rejections not monotone in tau: {rejections:?}"));
    }
    Ok(format!("500 oracle matches, rejections {}..{} over 21 thresholds", rejections[0], rejections[20]))
}

/// Random per-model predictions for one report: each model sees a noisy
/// copy of a shared truth so votes overlap realistically.
pub fn random_predictions(r: &mut impl rand::Rng, n_models: usize) -> Vec<Vec<oncoie::corpus::Span>> {
    let len = r.gen_range(5..40);
    let truth = super::random_spans(r, len);
    (0..n_models)
        .map(|_| {
            if r.gen_bool(0.4) {
                super::random_spans(r, len)
            } else {
                truth.iter().filter(|_| r.gen_bool(0.8)).cloned().collect()
            }
        })
        .collect()
}

/// Criterion 10: four ensemble properties over 200 random cases each.
pub fn ensemble_suite() -> Result<String, String> {
    use oncoie::ensemble::{candidates, vote, VoteConfig};
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut r = rng(1010);
    for case in 0..200 {
        let n = r.gen_range(1..=8);
        let preds = random_predictions(&mut r, n);
        let k = r.gen_range(1..=n);
        let cfg = VoteConfig::with_threshold(k);
        let fused = vote(&preds, &cfg).map_err(|e| e.to_string())?;

        let mut shuffled = preds.clone();
        shuffled.shuffle(&mut r);
        if vote(&shuffled, &cfg).map_err(|e| e.to_string())? != fused {
            return Err(format!("case {case}: order changed the vote"));
        }

        for t in 1..n {
            let wide: Vec<_> = candidates(&preds, t).into_iter().map(|(s, _)| s).collect();
            if candidates(&preds, t + 1).iter().any(|(s, _)| !wide.contains(s)) {
                return Err(format!("case {case}: candidates at {} not within {t}", t + 1));
            }
        }

        let single = vote(&preds[..1], &VoteConfig::with_threshold(1)).map_err(|e| e.to_string())?;
        if single != preds[0] {
            return Err(format!("case {case}: single model not reproduced"));
        }

        if fused.windows(2).any(|w| w[0].overlaps(&w[1]) || w[0].start > w[1].start) {
            return Err(format!("case {case}: overlapping or unsorted output"));
        }
        for (i, a) in fused.iter().enumerate() {
            if fused[i + 1..].iter().any(|b| a.overlaps(b)) {
                return Err(format!("case {case}: overlapping output"));
            }
        }
    }
    Ok("200 cases per property".into())
}
