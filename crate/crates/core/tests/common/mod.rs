//! Reference implementations and fixtures shared by the integration tests.
//! The oracles recompute everything from scratch; the check drivers compare
//! library output against them.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashMap};

use awe_core::corpus::{Label, SentencePair};
use awe_core::neural::{loss_and_gradients, AweVectors, FeedForward, Instance, ModelParams};
use awe_core::trainer::{pair_gradients, pair_objective};
use awe_core::EmbeddingTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- extraction

/// Enumerates every cross-sentence token pair, applies the thresholds, then
/// drops every entailment-derived pair type seen among neutral pairs.
pub fn oracle_extract(
    corpus: &[SentencePair],
    vectors: &HashMap<String, Vec<f64>>,
    t_plus: f64,
    t_minus: f64,
) -> BTreeMap<(String, String), u64> {
    let cos = |a: &[f64], b: &[f64]| -> Option<f64> {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            None
        } else {
            Some(dot / (na * nb))
        }
    };
    let mut ent: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut neu: BTreeMap<(String, String), u64> = BTreeMap::new();
    for pair in corpus {
        let (bucket, t) = match pair.label {
            Label::Entailment => (&mut ent, t_plus),
            Label::Neutral => (&mut neu, t_minus),
            Label::Contradiction => continue,
        };
        for w in &pair.premise {
            for c in &pair.hypothesis {
                let (Some(a), Some(b)) = (vectors.get(w), vectors.get(c)) else {
                    continue;
                };
                if cos(a, b).is_some_and(|s| s > t) {
                    *bucket.entry((w.clone(), c.clone())).or_insert(0) += 1;
                }
            }
        }
    }
    ent.retain(|k, _| !neu.contains_key(k));
    ent
}

/// A random labeled corpus over a small vocabulary. Some tokens are missing
/// from the table and a few have zero vectors.
pub struct RandomCorpus {
    pub corpus: Vec<SentencePair>,
    pub vectors: HashMap<String, Vec<f64>>,
    pub table: EmbeddingTable,
}

pub fn random_corpus<R: Rng>(rng: &mut R, n_pairs: usize, dim: usize) -> RandomCorpus {
    let vocab_size = rng.gen_range(5..30);
    let vocab: Vec<String> = (0..vocab_size).map(|i| format!("w{i}")).collect();
    let mut vectors = HashMap::new();
    let mut rows = Vec::new();
    for w in &vocab {
        let roll: f64 = rng.gen();
        if roll < 0.1 {
            continue;
        }
        let v: Vec<f64> = if roll < 0.15 {
            vec![0.0; dim]
        } else {
            (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        vectors.insert(w.clone(), v.clone());
        rows.push((w.clone(), v));
    }
    if rows.is_empty() {
        let v = vec![1.0; dim];
        vectors.insert(vocab[0].clone(), v.clone());
        rows.push((vocab[0].clone(), v));
    }
    let sentence = |rng: &mut R| -> Vec<String> {
        (0..rng.gen_range(1..7))
            .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
            .collect()
    };
    let corpus = (0..n_pairs)
        .map(|_| SentencePair {
            premise: sentence(rng),
            hypothesis: sentence(rng),
            label: Label::from_class_index(rng.gen_range(0..3)).unwrap(),
        })
        .collect();
    RandomCorpus {
        corpus,
        vectors,
        table: EmbeddingTable::from_rows(rows).unwrap(),
    }
}

// ------------------------------------------------------ embedding objective

fn ln_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-occurrence objective, written out term by term.
pub fn oracle_pair_objective(
    u_w: &[f64],
    v_c: &[f64],
    negatives: &[Vec<f64>],
    v_unk: &[f64],
    u_unk: &[f64],
) -> f64 {
    let mut total = ln_sigmoid(dotp(v_c, u_w));
    for v in negatives {
        total += ln_sigmoid(-dotp(v, u_w));
    }
    total + ln_sigmoid(-dotp(v_unk, u_w)) + ln_sigmoid(-dotp(v_c, u_unk))
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = f(&probe);
            probe[i] = orig - h;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `‖a − n‖∞ / max(‖a‖∞, ‖n‖∞, 1e-8)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    inf(&diff) / inf(analytic).max(inf(numeric)).max(1e-8)
}

pub fn random_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
}

// ---------------------------------------------------------- classifier model

fn ff(net: &FeedForward, x: &[f64]) -> Vec<f64> {
    let mut hidden = vec![0.0; net.hidden];
    for k in 0..net.hidden {
        let mut z = net.b1[k];
        for i in 0..net.input {
            z += net.w1[k * net.input + i] * x[i];
        }
        hidden[k] = if z > 0.0 { z } else { 0.0 };
    }
    let mut out = vec![0.0; net.output];
    for o in 0..net.output {
        let mut z = net.b2[o];
        for k in 0..net.hidden {
            z += net.w2[o * net.hidden + k] * hidden[k];
        }
        out[o] = z;
    }
    out
}

fn soft(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Straight-line attend/compare/aggregate forward pass returning class
/// log-probabilities. `eta` overrides `σ(eta_raw)` when given.
pub fn oracle_forward(
    params: &ModelParams,
    p: &[Vec<f64>],
    h: &[Vec<f64>],
    awe: Option<&AweVectors>,
    eta: Option<f64>,
) -> Vec<f64> {
    let (lp, lh) = (p.len(), h.len());
    let fp: Vec<Vec<f64>> = p.iter().map(|x| ff(&params.f, x)).collect();
    let fh: Vec<Vec<f64>> = h.iter().map(|x| ff(&params.f, x)).collect();
    let e = |i: usize, j: usize| dotp(&fp[i], &fh[j]);
    let attend = |score: &dyn Fn(usize, usize) -> f64| {
        let mut beta = vec![vec![0.0; h[0].len()]; lp];
        for i in 0..lp {
            let w = soft(&(0..lh).map(|j| score(i, j)).collect::<Vec<_>>());
            for j in 0..lh {
                for k in 0..h[j].len() {
                    beta[i][k] += w[j] * h[j][k];
                }
            }
        }
        let mut alpha = vec![vec![0.0; p[0].len()]; lh];
        for j in 0..lh {
            let w = soft(&(0..lp).map(|i| score(i, j)).collect::<Vec<_>>());
            for i in 0..lp {
                for k in 0..p[i].len() {
                    alpha[j][k] += w[i] * p[i][k];
                }
            }
        }
        (beta, alpha)
    };
    let (mut beta, mut alpha) = attend(&e);
    if let Some(awe) = awe {
        let eta = eta.unwrap_or(1.0 / (1.0 + (-params.eta_raw).exp()));
        let e2 = |i: usize, j: usize| dotp(&awe.v[j], &awe.u[i]);
        let (b2, a2) = attend(&e2);
        for (x, y) in beta.iter_mut().flatten().zip(b2.iter().flatten()) {
            *x = eta * *x + (1.0 - eta) * y;
        }
        for (x, y) in alpha.iter_mut().flatten().zip(a2.iter().flatten()) {
            *x = eta * *x + (1.0 - eta) * y;
        }
    }
    let hidden = params.g.output;
    let mut agg = vec![0.0; 2 * hidden];
    for i in 0..lp {
        let x: Vec<f64> = p[i].iter().chain(&beta[i]).copied().collect();
        for (k, y) in ff(&params.g, &x).into_iter().enumerate() {
            agg[k] += y;
        }
    }
    for j in 0..lh {
        let x: Vec<f64> = h[j].iter().chain(&alpha[j]).copied().collect();
        for (k, y) in ff(&params.g, &x).into_iter().enumerate() {
            agg[hidden + k] += y;
        }
    }
    let logits = ff(&params.h, &agg);
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// A random instance; `awe_dim` adds entailment vectors.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    lp: usize,
    lh: usize,
    dim: usize,
    awe_dim: Option<usize>,
    class_count: usize,
) -> Instance {
    let side = |rng: &mut R, n: usize, d: usize| {
        (0..n).map(|_| random_vec(rng, d, 1.0)).collect::<Vec<_>>()
    };
    Instance {
        premise: side(rng, lp, dim),
        hypothesis: side(rng, lh, dim),
        awe: awe_dim.map(|d| AweVectors {
            u: side(rng, lp, d),
            v: side(rng, lh, d),
        }),
        label: rng.gen_range(0..class_count),
    }
}

// ------------------------------------------------------- gradient checks

/// Worst relative error over every gradient block of one random instance.
fn embedding_check(rng: &mut ChaCha8Rng) -> f64 {
    let d = rng.gen_range(1..=8);
    let k = rng.gen_range(0..=4);
    let u_w = random_vec(rng, d, 1.0);
    let v_c = random_vec(rng, d, 1.0);
    let negs: Vec<Vec<f64>> = (0..k).map(|_| random_vec(rng, d, 1.0)).collect();
    let v_unk = random_vec(rng, d, 1.0);
    let u_unk = random_vec(rng, d, 1.0);
    let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
    let g = pair_gradients(&u_w, &v_c, &neg_refs, &v_unk, &u_unk).unwrap();
    let h = 1e-5;

    let lib = pair_objective(&u_w, &v_c, &neg_refs, &v_unk, &u_unk).unwrap();
    let oracle = oracle_pair_objective(&u_w, &v_c, &negs, &v_unk, &u_unk);
    assert!((lib - oracle).abs() < 1e-12);

    let mut worst = relative_error(
        &g.u_w,
        &numeric_gradient(&u_w, h, |x| {
            oracle_pair_objective(x, &v_c, &negs, &v_unk, &u_unk)
        }),
    );
    worst = worst.max(relative_error(
        &g.v_c,
        &numeric_gradient(&v_c, h, |x| {
            oracle_pair_objective(&u_w, x, &negs, &v_unk, &u_unk)
        }),
    ));
    for n in 0..k {
        let num = numeric_gradient(&negs[n], h, |x| {
            let mut probe = negs.clone();
            probe[n] = x.to_vec();
            oracle_pair_objective(&u_w, &v_c, &probe, &v_unk, &u_unk)
        });
        worst = worst.max(relative_error(&g.negatives[n], &num));
    }
    worst = worst.max(relative_error(
        &g.v_unk,
        &numeric_gradient(&v_unk, h, |x| {
            oracle_pair_objective(&u_w, &v_c, &negs, x, &u_unk)
        }),
    ));
    worst.max(relative_error(
        &g.u_unk,
        &numeric_gradient(&u_unk, h, |x| {
            oracle_pair_objective(&u_w, &v_c, &negs, &v_unk, x)
        }),
    ))
}

pub fn embedding_gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|_| embedding_check(&mut rng))
        .fold(0.0, f64::max)
}

/// Relative error between analytic and numeric gradients of the mean loss
/// over all parameters, including the mixture weight.
fn model_check(rng: &mut ChaCha8Rng, awe: bool) -> f64 {
    let d = rng.gen_range(2..=4);
    let hidden = rng.gen_range(2..=5);
    let classes = rng.gen_range(2..=3);
    // Generic point: random biases too, so no pre-activation sits exactly
    // on a rectifier corner the way zero-bias initialization can.
    let mut params = ModelParams::zeros(d, hidden, classes);
    let flat: Vec<f64> = (0..params.param_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    params.set_flat(&flat);
    let batch: Vec<Instance> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let (lp, lh) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            random_instance(rng, lp, lh, d, awe.then_some(3), classes)
        })
        .collect();
    let (_, grad) = loss_and_gradients(&params, &batch).unwrap();
    let flat = params.to_flat();
    let mut probe = params.clone();
    let numeric = numeric_gradient(&flat, 1e-4, |x| {
        probe.set_flat(x);
        loss_and_gradients(&probe, &batch).unwrap().0
    });
    let analytic = grad.to_flat();
    if !awe {
        assert_eq!(*analytic.last().unwrap(), 0.0);
    }
    relative_error(&analytic, &numeric)
}

pub fn model_gradient_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..instances)
        .map(|k| model_check(&mut rng, k % 2 == 1))
        .fold(0.0, f64::max)
}

// ------------------------------------------------------- toy embeddings

/// One-way implications, including a chain so that some words occur on both
/// sides.
pub fn skewed_toy_pairs() -> awe_core::WordPairSet {
    [
        ("poodle", "dog", 40),
        ("beagle", "dog", 30),
        ("dog", "animal", 40),
        ("cat", "animal", 40),
        ("rose", "flower", 40),
        ("tulip", "flower", 30),
        ("car", "vehicle", 40),
    ]
    .into_iter()
    .map(|(w, c, n)| (awe_core::WordPair::new(w, c), n))
    .collect()
}

pub fn toy_embeddings(seed: u64) -> awe_core::AsymmetricEmbeddings {
    let config = awe_core::TrainConfig {
        dim: 10,
        negatives: 3,
        epochs: 30,
        initial_step_size: 0.05,
        seed,
        ..Default::default()
    };
    awe_core::trainer::train(&skewed_toy_pairs(), &config)
        .unwrap()
        .embeddings
}
