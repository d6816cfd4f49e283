//! Helpers shared by the integration suites: finite-difference gradient
//! checks, brute-force metric oracles and small fixtures.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transicd::embeddings::EmbeddingMatrix;
use transicd::harness::batch_gradients;
use transicd::losses::{LabelStats, Objective};
use transicd::metrics::ScoreMatrix;
use transicd::model::{Mode, Model, ModelConfig};
use transicd::numerics::{Tape, Tensor, Var};
use transicd::preprocess::Document;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// `|a − n| / max(|a|, |n|, 1e-3)`; the floor keeps near-zero gradients from
/// turning rounding noise into large ratios.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn perturbed(inputs: &[Tensor], which: usize, at: usize, delta: f64) -> Vec<Tensor> {
    let mut out = inputs.to_vec();
    let mut data = out[which].to_vec();
    data[at] += delta;
    out[which] = Tensor::new(out[which].shape().to_vec(), data).unwrap();
    out
}

/// Builds `f` on a fresh tape with every input as a leaf, backpropagates, and
/// compares each partial derivative with a central difference. Returns the
/// largest relative error.
pub fn check_graph<F>(inputs: &[Tensor], f: F) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let eval = |xs: &[Tensor]| {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        f(&tape, &vars).value().item().expect("scalar output")
    };
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = f(&tape, &vars);
    let grads = tape.backward(out).unwrap();
    let mut worst: f64 = 0.0;
    for (i, (x, v)) in inputs.iter().zip(&vars).enumerate() {
        let g = grads.wrt(*v).expect("leaf gradient");
        for j in 0..x.numel() {
            let plus = eval(&perturbed(inputs, i, j, FD_STEP));
            let minus = eval(&perturbed(inputs, i, j, -FD_STEP));
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[j], numeric));
        }
    }
    worst
}

/// Contracts `y` with fixed random weights so every output entry carries a
/// distinct gradient.
pub fn weighted_sum<'t>(tape: &'t Tape, y: Var<'t>, seed: u64) -> Var<'t> {
    let w = random_tensor(&mut rng(seed), &y.shape(), 1.0);
    y.mul(tape.constant(w)).unwrap().sum()
}

pub const CASES: usize = 50;

/// One differentiable op under test: builds random inputs for a case and the
/// scalar graph over them.
pub struct OpCase {
    pub name: &'static str,
    pub inputs: fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    pub graph: for<'t> fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
}

fn dims(r: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (r.gen_range(1..5), r.gen_range(2..6), r.gen_range(1..5))
}

/// Random entries kept at least `gap` away from zero, for kinked ops.
fn away_from_zero(r: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = r.gen_range(gap..2.0);
            if r.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn rand_mask(seed: u64, n: usize) -> Vec<bool> {
    let mut r = rng(seed);
    let mut m: Vec<bool> = (0..n).map(|_| r.gen_bool(0.7)).collect();
    m[r.gen_range(0..n)] = true;
    m
}

pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matmul",
            inputs: |r| {
                let (m, k, p) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0), random_tensor(r, &[k, p], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].matmul(x[1]).unwrap(), 1),
        },
        OpCase {
            name: "matmul_t",
            inputs: |r| {
                let (m, k, p) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0), random_tensor(r, &[p, k], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].matmul_t(x[1]).unwrap(), 2),
        },
        OpCase {
            name: "add",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0), random_tensor(r, &[m, k], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].add(x[1]).unwrap(), 3),
        },
        OpCase {
            name: "add_bias",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0), random_tensor(r, &[k], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].add(x[1]).unwrap(), 4),
        },
        OpCase {
            name: "mul",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0), random_tensor(r, &[m, k], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].mul(x[1]).unwrap(), 5),
        },
        OpCase {
            name: "scale",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].scale(-1.7), 6),
        },
        OpCase {
            name: "tanh",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 3.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].tanh(), 7),
        },
        OpCase {
            name: "sigmoid",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 5.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].sigmoid(), 8),
        },
        OpCase {
            name: "relu",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![away_from_zero(r, &[m, k], 1e-3)]
            },
            graph: |t, x| weighted_sum(t, x[0].relu(), 9),
        },
        OpCase {
            name: "softmax",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 4.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].softmax(None).unwrap(), 10),
        },
        OpCase {
            name: "softmax_masked",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 4.0)]
            },
            graph: |t, x| {
                let mask = rand_mask(11, x[0].shape()[1]);
                weighted_sum(t, x[0].softmax(Some(&mask)).unwrap(), 12)
            },
        },
        OpCase {
            name: "layer_norm",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![
                    random_tensor(r, &[m, k], 2.0),
                    random_tensor(r, &[k], 1.5),
                    random_tensor(r, &[k], 1.0),
                ]
            },
            graph: |t, x| weighted_sum(t, x[0].layer_norm(x[1], x[2]).unwrap(), 13),
        },
        OpCase {
            name: "gather_rows",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m + 1, k], 1.0)]
            },
            graph: |t, x| {
                let rows = x[0].shape()[0];
                let ids: Vec<usize> = (0..7).map(|i| (i * 5 + 1) % rows).collect();
                weighted_sum(t, x[0].gather_rows(&ids).unwrap(), 14)
            },
        },
        OpCase {
            name: "slice_cols",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k + 2], 1.0)]
            },
            graph: |t, x| {
                let cols = x[0].shape()[1];
                weighted_sum(t, x[0].slice_cols(1, cols - 2).unwrap(), 15)
            },
        },
        OpCase {
            name: "concat_cols",
            inputs: |r| {
                let (m, k, p) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0), random_tensor(r, &[m, p], 1.0)]
            },
            graph: |t, x| weighted_sum(t, Var::concat_cols(&[x[0], x[1], x[0]]).unwrap(), 16),
        },
        OpCase {
            name: "row_sum",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0)]
            },
            graph: |t, x| weighted_sum(t, x[0].row_sum().unwrap(), 17),
        },
        OpCase {
            name: "sum",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0)]
            },
            graph: |_, x| x[0].mul(x[0]).unwrap().sum(),
        },
        OpCase {
            name: "reshape",
            inputs: |r| {
                let (m, k, _) = dims(r);
                vec![random_tensor(r, &[m, k], 1.0)]
            },
            graph: |t, x| {
                let n = x[0].shape().iter().product();
                weighted_sum(t, x[0].reshape(vec![n]).unwrap().tanh(), 18)
            },
        },
        OpCase {
            name: "bce_with_logits",
            inputs: |r| {
                let (m, _, _) = dims(r);
                vec![random_tensor(r, &[m + 3], 4.0)]
            },
            graph: |_, x| {
                let n = x[0].shape()[0];
                let mut r = rng(19);
                let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(r.gen_bool(0.5)))).collect();
                let shift: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..2.0)).collect();
                x[0].bce_with_logits(&y, &shift, 1.3).unwrap()
            },
        },
    ]
}

/// Worst relative error of one op across `CASES` random instances.
pub fn check_op(op: &OpCase, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..CASES)
        .map(|_| check_graph(&(op.inputs)(&mut r), op.graph))
        .fold(0.0, f64::max)
}

/// Tiny network: 12-token documents, width 8, one layer, two heads, four labels.
pub fn tiny_model(seed: u64) -> (Model, Vec<Document>) {
    let vocab = 20;
    let mut r = rng(seed);
    let mut emb = random_tensor(&mut r, &[vocab, 8], 0.5).to_vec();
    emb[..8].fill(0.0);
    let embeddings = EmbeddingMatrix::new(Tensor::matrix(vocab, 8, emb).unwrap()).unwrap();
    let mut config = ModelConfig::new(vocab, 4, 8, 12);
    config.layers = 1;
    config.heads = 2;
    let mut model = Model::init(config, &embeddings, seed).unwrap();
    // Non-zero biases, gains and heads so every parameter sees a generic point.
    for t in model.params.tensors.iter_mut().skip(1) {
        let noise = random_tensor(&mut r, t.shape(), 0.3);
        let data = t.data().iter().zip(noise.data()).map(|(a, b)| a + b).collect();
        *t = Tensor::new(t.shape().to_vec(), data).unwrap();
    }
    let doc = |id: &str, tokens: Vec<usize>, labels: &[usize]| Document {
        id: id.into(),
        raw_tokens: tokens.iter().map(|t| format!("w{t}")).collect(),
        tokens,
        labels: labels.iter().copied().collect(),
    };
    let docs = vec![
        doc("a", (0..12).map(|i| 2 + (i * 7) % 18).collect(), &[0, 2]),
        doc("b", (0..9).map(|i| 2 + (i * 5 + 3) % 18).collect(), &[1]),
    ];
    (model, docs)
}

pub fn tiny_objectives(docs: &[Document]) -> Vec<(&'static str, Objective)> {
    let stats = LabelStats::from_label_sets(4, docs.iter().map(|d| &d.labels), 3.0).unwrap();
    vec![
        ("bce", Objective::Bce),
        ("ldam", Objective::Ldam { stats, scale: 1.0 }),
    ]
}

/// Worst relative error over every scalar parameter of the tiny model. The
/// PAD embedding row is excluded: it is never trainable.
pub fn check_model(model: &Model, docs: &[Document], objective: &Objective) -> f64 {
    let batch: Vec<&Document> = docs.iter().collect();
    let loss = |m: &Model| batch_gradients(m, &batch, objective, false, &mut Mode::Eval).unwrap().0;
    let (_, grads) = batch_gradients(model, &batch, objective, false, &mut Mode::Eval).unwrap();
    let d = model.config.d_model;
    let mut worst: f64 = 0.0;
    for (i, g) in grads.iter().enumerate() {
        let g = g.as_ref().expect("every parameter is trainable");
        let start = if i == 0 { d } else { 0 };
        for j in start..g.numel() {
            let mut m = model.clone();
            m.params.tensors = perturbed(&model.params.tensors, i, j, FD_STEP);
            let plus = loss(&m);
            m.params.tensors = perturbed(&model.params.tensors, i, j, -FD_STEP);
            let minus = loss(&m);
            worst = worst.max(rel_err(g.data()[j], (plus - minus) / (2.0 * FD_STEP)));
        }
    }
    worst
}

/// Random score matrix with ties and at least one positive and one negative.
pub fn random_score_matrix(r: &mut ChaCha8Rng) -> ScoreMatrix {
    let docs = r.gen_range(1..=20);
    let labels = r.gen_range(if docs == 1 { 2 } else { 1 }..=8);
    let levels = r.gen_range(2..12);
    loop {
        let scores: Vec<f64> = (0..docs * labels)
            .map(|_| r.gen_range(0..=levels) as f64 / levels as f64)
            .collect();
        let rate = r.gen_range(0.1..0.9);
        let truth: Vec<bool> = (0..docs * labels).map(|_| r.gen_bool(rate)).collect();
        if truth.iter().any(|&t| t) && truth.iter().any(|&t| !t) {
            return ScoreMatrix::new(docs, labels, scores, truth).unwrap();
        }
    }
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn brute_auc(pairs: &[(f64, bool)]) -> Option<f64> {
    let (mut wins, mut total) = (0.0, 0.0);
    for &(sp, tp) in pairs {
        for &(sn, tn) in pairs {
            if tp && !tn {
                total += 1.0;
                wins += if sp > sn {
                    1.0
                } else if sp == sn {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (total > 0.0).then(|| wins / total)
}

pub struct BruteMetrics {
    pub macro_auc: Option<f64>,
    pub micro_auc: f64,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub p_at_k: f64,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

pub fn brute_metrics(sm: &ScoreMatrix, k: usize) -> BruteMetrics {
    let (n, l) = (sm.docs(), sm.labels());
    let cell = |d: usize, j: usize| (sm.score(d, j), sm.truth(d, j));
    let per_label: Vec<f64> = (0..l)
        .filter_map(|j| brute_auc(&(0..n).map(|d| cell(d, j)).collect::<Vec<_>>()))
        .collect();
    let macro_auc = (!per_label.is_empty()).then(|| per_label.iter().sum::<f64>() / per_label.len() as f64);
    let all: Vec<_> = (0..n).flat_map(|d| (0..l).map(move |j| (d, j))).map(|(d, j)| cell(d, j)).collect();
    let micro_auc = brute_auc(&all).unwrap();

    let mut macro_f1 = 0.0;
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for j in 0..l {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for d in 0..n {
            let (s, t) = cell(d, j);
            let pred = s >= 0.5;
            tp += usize::from(pred && t);
            fp += usize::from(pred && !t);
            fn_ += usize::from(!pred && t);
        }
        macro_f1 += f1(tp, fp, fn_) / l as f64;
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
    }

    // Label j is in the top k when fewer than k labels outrank it; a tie is
    // won by the lower index.
    let mut p_at_k = 0.0;
    for d in 0..n {
        let mut hits = 0;
        for j in 0..l {
            let above = (0..l)
                .filter(|&i| sm.score(d, i) > sm.score(d, j) || (sm.score(d, i) == sm.score(d, j) && i < j))
                .count();
            if above < k && sm.truth(d, j) {
                hits += 1;
            }
        }
        p_at_k += hits as f64 / k as f64 / n as f64;
    }
    BruteMetrics {
        macro_auc,
        micro_auc,
        macro_f1,
        micro_f1: f1(tp_all, fp_all, fn_all),
        p_at_k,
    }
}
