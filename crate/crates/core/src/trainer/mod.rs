//! Asymmetric entailment embeddings trained on a mined pair multiset.
//!
//! Premise words get `u` vectors, hypothesis words get `v` vectors, and the
//! same token on both sides owns two unrelated rows. Each pair occurrence
//! `(w, c)` contributes
//!
//! ```text
//! log σ(v_c·u_w) + Σ_{c'} log σ(−v_{c'}·u_w) + log σ(−v_UNK2·u_w) + log σ(−v_c·u_UNK1)
//! ```
//!
//! which is maximized by plain stochastic gradient ascent.

mod sampler;

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::sampler::{AliasTable, NegativeSampler};
use crate::embedding::{load_text_embeddings, save_text_embeddings, EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::math::{axpy, dot, log_sigmoid, sigmoid};
use crate::pairs::WordPairSet;

/// Reserved premise-side row for words outside the pair set.
pub const UNK_PREMISE: &str = "<UNK1>";
/// Reserved hypothesis-side row for words outside the pair set.
pub const UNK_HYPOTHESIS: &str = "<UNK2>";

/// Seed offset used when measuring the objective, so that measurements never
/// consume the training RNG stream.
const EVAL_SEED_OFFSET: u64 = 0x5EED_F00D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_step_size: f64,
    pub distribution_exponent: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 300,
            negatives: 5,
            epochs: 5,
            initial_step_size: 0.025,
            distribution_exponent: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.initial_step_size > 0.0 && self.initial_step_size.is_finite()) {
            return Err(Error::Config("initial_step_size must be positive".into()));
        }
        if !(self.distribution_exponent >= 0.0 && self.distribution_exponent.is_finite()) {
            return Err(Error::Config(
                "distribution_exponent must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Premise-side (`u`) and hypothesis-side (`v`) tables, each ending in its UNK row.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetricEmbeddings {
    premise: EmbeddingTable,
    hypothesis: EmbeddingTable,
    unk_premise: usize,
    unk_hypothesis: usize,
}

impl AsymmetricEmbeddings {
    pub fn new(premise: EmbeddingTable, hypothesis: EmbeddingTable) -> Result<Self> {
        if premise.dim() != hypothesis.dim() {
            return Err(Error::DimensionMismatch {
                expected: premise.dim(),
                found: hypothesis.dim(),
            });
        }
        let unk_premise = premise
            .vocab()
            .id(UNK_PREMISE)
            .ok_or_else(|| Error::Domain(format!("premise table lacks {UNK_PREMISE}")))?;
        let unk_hypothesis = hypothesis
            .vocab()
            .id(UNK_HYPOTHESIS)
            .ok_or_else(|| Error::Domain(format!("hypothesis table lacks {UNK_HYPOTHESIS}")))?;
        Ok(AsymmetricEmbeddings {
            premise,
            hypothesis,
            unk_premise,
            unk_hypothesis,
        })
    }

    pub fn dim(&self) -> usize {
        self.premise.dim()
    }

    pub fn premise_table(&self) -> &EmbeddingTable {
        &self.premise
    }

    pub fn hypothesis_table(&self) -> &EmbeddingTable {
        &self.hypothesis
    }

    /// Premise-side row id of `token`, falling back to UNK1.
    pub fn premise_id(&self, token: &str) -> usize {
        self.premise.vocab().id(token).unwrap_or(self.unk_premise)
    }

    /// Hypothesis-side row id of `token`, falling back to UNK2.
    pub fn hypothesis_id(&self, token: &str) -> usize {
        self.hypothesis
            .vocab()
            .id(token)
            .unwrap_or(self.unk_hypothesis)
    }

    pub fn knows_premise(&self, token: &str) -> bool {
        token != UNK_PREMISE && self.premise.vocab().contains(token)
    }

    pub fn knows_hypothesis(&self, token: &str) -> bool {
        token != UNK_HYPOTHESIS && self.hypothesis.vocab().contains(token)
    }

    /// `u` vector for a premise token (UNK1 when unknown).
    pub fn u(&self, token: &str) -> &[f64] {
        self.premise.row(self.premise_id(token))
    }

    /// `v` vector for a hypothesis token (UNK2 when unknown).
    pub fn v(&self, token: &str) -> &[f64] {
        self.hypothesis.row(self.hypothesis_id(token))
    }

    pub fn u_unk(&self) -> &[f64] {
        self.premise.row(self.unk_premise)
    }

    pub fn v_unk(&self) -> &[f64] {
        self.hypothesis.row(self.unk_hypothesis)
    }

    pub fn save<W1: Write, W2: Write>(&self, premise: W1, hypothesis: W2) -> Result<()> {
        save_text_embeddings(&self.premise, premise)?;
        save_text_embeddings(&self.hypothesis, hypothesis)
    }

    pub fn load<R1: Read, R2: Read>(premise: R1, hypothesis: R2) -> Result<Self> {
        let premise = load_text_embeddings(premise, None)?.table;
        let hypothesis = load_text_embeddings(hypothesis, Some(premise.dim()))?.table;
        AsymmetricEmbeddings::new(premise, hypothesis)
    }
}

/// Word-level directional score `σ(v_c·u_w)` for "w entails c".
pub fn entailment_score(emb: &AsymmetricEmbeddings, w: &str, c: &str) -> f64 {
    sigmoid(dot(emb.v(c), emb.u(w)))
}

fn check_dims(
    u_w: &[f64],
    v_c: &[f64],
    negatives: &[&[f64]],
    v_unk: &[f64],
    u_unk: &[f64],
) -> Result<()> {
    let d = u_w.len();
    for v in [v_c, v_unk, u_unk]
        .into_iter()
        .chain(negatives.iter().copied())
    {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    Ok(())
}

/// Per-occurrence objective with explicit negatives and the two UNK terms.
pub fn pair_objective(
    u_w: &[f64],
    v_c: &[f64],
    negatives: &[&[f64]],
    v_unk: &[f64],
    u_unk: &[f64],
) -> Result<f64> {
    check_dims(u_w, v_c, negatives, v_unk, u_unk)?;
    let mut obj = log_sigmoid(dot(v_c, u_w));
    for v_n in negatives {
        obj += log_sigmoid(-dot(v_n, u_w));
    }
    obj += log_sigmoid(-dot(v_unk, u_w));
    obj += log_sigmoid(-dot(v_c, u_unk));
    Ok(obj)
}

/// Gradients of [`pair_objective`] with respect to each of its vector inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub u_w: Vec<f64>,
    pub v_c: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
    pub v_unk: Vec<f64>,
    pub u_unk: Vec<f64>,
}

pub fn pair_gradients(
    u_w: &[f64],
    v_c: &[f64],
    negatives: &[&[f64]],
    v_unk: &[f64],
    u_unk: &[f64],
) -> Result<PairGradients> {
    check_dims(u_w, v_c, negatives, v_unk, u_unk)?;
    let d = u_w.len();
    let mut g = PairGradients {
        u_w: vec![0.0; d],
        v_c: vec![0.0; d],
        negatives: Vec::with_capacity(negatives.len()),
        v_unk: vec![0.0; d],
        u_unk: vec![0.0; d],
    };

    // d/dx log σ(x) = σ(−x); d/dx log σ(−x) = −σ(x)
    let pos = sigmoid(-dot(v_c, u_w));
    axpy(pos, v_c, &mut g.u_w);
    axpy(pos, u_w, &mut g.v_c);

    for v_n in negatives {
        let s = sigmoid(dot(v_n, u_w));
        axpy(-s, v_n, &mut g.u_w);
        g.negatives.push(u_w.iter().map(|x| -s * x).collect());
    }

    let s = sigmoid(dot(v_unk, u_w));
    axpy(-s, v_unk, &mut g.u_w);
    axpy(-s, u_w, &mut g.v_unk);

    let s = sigmoid(dot(v_c, u_unk));
    axpy(-s, u_unk, &mut g.v_c);
    axpy(-s, v_c, &mut g.u_unk);

    Ok(g)
}

/// Pair set re-expressed over row ids of an [`AsymmetricEmbeddings`].
struct IndexedPairs {
    occurrences: Vec<(usize, usize)>,
    sampler: NegativeSampler,
}

impl IndexedPairs {
    fn new(pairs: &WordPairSet, emb: &AsymmetricEmbeddings, exponent: f64) -> Result<Self> {
        let mut occurrences = Vec::with_capacity(pairs.total() as usize);
        let n_hyp = emb.hypothesis.len();
        let mut hyp_counts = vec![0u64; n_hyp];
        for (pair, count) in pairs.iter() {
            let w = emb.premise_id(&pair.premise_word);
            let c = emb.hypothesis_id(&pair.hypothesis_word);
            hyp_counts[c] += count;
            occurrences.extend(std::iter::repeat_n((w, c), count as usize));
        }
        // The sampler covers every hypothesis row except UNK2, which is
        // always the last row and always an explicit term.
        debug_assert_eq!(emb.unk_hypothesis, n_hyp - 1);
        let sampled = &hyp_counts[..n_hyp - 1];
        let sampler = if sampled.iter().all(|&c| c > 0) {
            NegativeSampler::new(sampled, exponent)?
        } else {
            return Err(Error::Domain(
                "pair set does not cover the hypothesis vocabulary".into(),
            ));
        };
        Ok(IndexedPairs {
            occurrences,
            sampler,
        })
    }
}

fn occurrence_objective(
    emb: &AsymmetricEmbeddings,
    w: usize,
    c: usize,
    negatives: &[usize],
) -> f64 {
    let neg: Vec<&[f64]> = negatives.iter().map(|&n| emb.hypothesis.row(n)).collect();
    pair_objective(
        emb.premise.row(w),
        emb.hypothesis.row(c),
        &neg,
        emb.v_unk(),
        emb.u_unk(),
    )
    .expect("rows share the table dimension")
}

/// Mean per-occurrence objective over `pairs`, with negatives drawn from a
/// sampler seeded by `seed` so repeated measurements are comparable.
pub fn mean_objective(
    emb: &AsymmetricEmbeddings,
    pairs: &WordPairSet,
    negatives: usize,
    exponent: f64,
    seed: u64,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set is empty".into()));
    }
    let restricted = restrict_to_vocab(pairs, emb);
    let indexed = IndexedPairs::new(&restricted, emb, exponent)?;
    Ok(mean_objective_indexed(emb, &indexed, negatives, seed))
}

fn mean_objective_indexed(
    emb: &AsymmetricEmbeddings,
    indexed: &IndexedPairs,
    negatives: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut neg = Vec::with_capacity(negatives);
    let mut sum = 0.0;
    for &(w, c) in &indexed.occurrences {
        indexed
            .sampler
            .draw_negatives(&mut rng, negatives, c, &mut neg);
        sum += occurrence_objective(emb, w, c, &neg);
    }
    sum / indexed.occurrences.len() as f64
}

/// Keeps only pairs whose hypothesis word has a row, so unknown words map to UNK
/// without inflating the sampler.
fn restrict_to_vocab(pairs: &WordPairSet, emb: &AsymmetricEmbeddings) -> WordPairSet {
    pairs
        .iter()
        .filter(|(p, _)| emb.knows_hypothesis(&p.hypothesis_word))
        .map(|(p, n)| (p.clone(), n))
        .collect()
}

/// Trained tables plus the objective measured before training and after each epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub embeddings: AsymmetricEmbeddings,
    /// `objective_history[0]` is the untrained value; entry `e` follows epoch `e`.
    pub objective_history: Vec<f64>,
}

pub fn train(pairs: &WordPairSet, config: &TrainConfig) -> Result<TrainOutcome> {
    train_from(pairs, config, None)
}

fn side_vocab<'a>(words: impl Iterator<Item = &'a str>, unk: &str) -> Result<Vocabulary> {
    let mut distinct: Vec<&str> = words.collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.contains(&unk) {
        return Err(Error::Domain(format!(
            "pair set uses the reserved token {unk}"
        )));
    }
    Vocabulary::from_tokens(distinct.into_iter().chain(std::iter::once(unk)))
}

/// Trains embeddings, optionally starting from `resume` for rows it shares.
pub fn train_from(
    pairs: &WordPairSet,
    config: &TrainConfig,
    resume: Option<&AsymmetricEmbeddings>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Empty("cannot train on an empty pair set".into()));
    }
    if let Some(prev) = resume {
        if prev.dim() != config.dim {
            return Err(Error::DimensionMismatch {
                expected: config.dim,
                found: prev.dim(),
            });
        }
    }

    let dim = config.dim;
    let premise_vocab = side_vocab(
        pairs.iter().map(|(p, _)| p.premise_word.as_str()),
        UNK_PREMISE,
    )?;
    let hyp_vocab = side_vocab(
        pairs.iter().map(|(p, _)| p.hypothesis_word.as_str()),
        UNK_HYPOTHESIS,
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = 0.5 / dim as f64;
    let mut init = |vocab: Vocabulary, prev: Option<&EmbeddingTable>| -> Result<EmbeddingTable> {
        let mut data: Vec<f64> = (0..vocab.len() * dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        if let Some(prev) = prev {
            for (id, token) in vocab.tokens().iter().enumerate() {
                if let Some(row) = prev.get(token) {
                    data[id * dim..(id + 1) * dim].copy_from_slice(row);
                }
            }
        }
        EmbeddingTable::new(vocab, dim, data)
    };
    let premise = init(premise_vocab, resume.map(|r| &r.premise))?;
    let hypothesis = init(hyp_vocab, resume.map(|r| &r.hypothesis))?;
    let mut emb = AsymmetricEmbeddings::new(premise, hypothesis)?;

    let indexed = IndexedPairs::new(pairs, &emb, config.distribution_exponent)?;
    let eval_seed = config.seed.wrapping_add(EVAL_SEED_OFFSET);
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(mean_objective_indexed(
        &emb,
        &indexed,
        config.negatives,
        eval_seed,
    ));

    let per_epoch = indexed.occurrences.len();
    let total_updates = (per_epoch * config.epochs) as f64;
    let lr0 = config.initial_step_size;
    let mut step = 0usize;
    let mut order = indexed.occurrences.clone();
    let mut neg_ids = Vec::with_capacity(config.negatives);
    let mut u_w = vec![0.0; dim];
    let mut v_c = vec![0.0; dim];
    let mut neg_rows: Vec<Vec<f64>> = Vec::with_capacity(config.negatives);

    for _epoch in 0..config.epochs {
        order.copy_from_slice(&indexed.occurrences);
        order.shuffle(&mut rng);
        for &(w, c) in &order {
            let progress = if total_updates > 1.0 {
                step as f64 / (total_updates - 1.0)
            } else {
                0.0
            };
            let lr = lr0 * (1.0 - 0.99 * progress);
            step += 1;

            indexed
                .sampler
                .draw_negatives(&mut rng, config.negatives, c, &mut neg_ids);
            u_w.copy_from_slice(emb.premise.row(w));
            v_c.copy_from_slice(emb.hypothesis.row(c));
            neg_rows.clear();
            neg_rows.extend(neg_ids.iter().map(|&n| emb.hypothesis.row(n).to_vec()));
            let negs: Vec<&[f64]> = neg_rows.iter().map(Vec::as_slice).collect();
            let g = pair_gradients(&u_w, &v_c, &negs, emb.v_unk(), emb.u_unk())?;

            axpy(lr, &g.u_w, emb.premise.row_mut(w));
            axpy(lr, &g.v_c, emb.hypothesis.row_mut(c));
            for (&n, gn) in neg_ids.iter().zip(&g.negatives) {
                axpy(lr, gn, emb.hypothesis.row_mut(n));
            }
            let (unk_p, unk_h) = (emb.unk_premise, emb.unk_hypothesis);
            axpy(lr, &g.v_unk, emb.hypothesis.row_mut(unk_h));
            axpy(lr, &g.u_unk, emb.premise.row_mut(unk_p));
        }
        history.push(mean_objective_indexed(
            &emb,
            &indexed,
            config.negatives,
            eval_seed,
        ));
    }

    Ok(TrainOutcome {
        embeddings: emb,
        objective_history: history,
    })
}
