//! Decomposable attention without intra-sentence attention, optionally mixing
//! in alignments computed from asymmetric entailment embeddings.
//!
//! Attend: `e_ij = F(p_i)·F(h_j)`, `β_i = Σ_j softmax_j(e_i:) h_j`,
//! `α_j = Σ_i softmax_i(e_:j) p_i`. With entailment embeddings the raw dot
//! products `e'_ij = v_j·u_i` give `β'`, `α'`, and the model uses
//! `β̂ = η β + (1 − η) β'` (likewise `α̂`) with `η = σ(eta_raw)`.
//! Compare: `v1 = Σ_i G([p_i; β̂_i])`, `v2 = Σ_j G([h_j; α̂_j])`.
//! Aggregate: `H([v1; v2])` followed by a log-softmax.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::feedforward::{FeedForward, FfTrace};
use crate::error::{Error, Result};
use crate::math::{axpy, dot, log_softmax, sigmoid, softmax};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub f: FeedForward,
    pub g: FeedForward,
    pub h: FeedForward,
    pub eta_raw: f64,
    pub class_count: usize,
    /// Overrides `σ(eta_raw)` when set; used to probe the mixture's extremes.
    #[serde(skip)]
    pub eta_pin: Option<f64>,
}

/// Premise/hypothesis vectors of one instance, with optional `u`/`v` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub premise: Vec<Vec<f64>>,
    pub hypothesis: Vec<Vec<f64>>,
    pub awe: Option<AweVectors>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AweVectors {
    /// Premise-side entailment embeddings, one per premise token.
    pub u: Vec<Vec<f64>>,
    /// Hypothesis-side entailment embeddings, one per hypothesis token.
    pub v: Vec<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub f_premise: Vec<FfTrace>,
    pub f_hypothesis: Vec<FfTrace>,
    /// Row softmax of `e` (premise attends over hypothesis).
    pub attn_premise: Vec<Vec<f64>>,
    /// Column softmax of `e`, stored as `[j][i]`.
    pub attn_hypothesis: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta_prime: Option<Vec<Vec<f64>>>,
    pub alpha_prime: Option<Vec<Vec<f64>>>,
    pub eta: f64,
    pub g_premise: Vec<FfTrace>,
    pub g_hypothesis: Vec<FfTrace>,
    pub h_trace: FfTrace,
    pub log_probs: Vec<f64>,
}

/// Source of inverted-dropout masks during training.
pub struct Dropout<'a, R: Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

impl<R: Rng> Dropout<'_, R> {
    fn mask(&mut self, n: usize) -> Option<Vec<f64>> {
        if self.rate <= 0.0 {
            return None;
        }
        let keep = 1.0 - self.rate;
        Some(
            (0..n)
                .map(|_| {
                    if self.rng.gen::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

fn weighted_sum(weights: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (w, v) in weights.iter().zip(vectors) {
        axpy(*w, v, &mut out);
    }
    out
}

/// Row and column softmax alignments of a score matrix `scores[i][j]`.
fn align(scores: &[Vec<f64>], premise: &[Vec<f64>], hypothesis: &[Vec<f64>]) -> Alignment {
    let rows: Vec<Vec<f64>> = scores.iter().map(|r| softmax(r)).collect();
    let cols: Vec<Vec<f64>> = (0..hypothesis.len())
        .map(|j| softmax(&scores.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    let beta = rows.iter().map(|w| weighted_sum(w, hypothesis)).collect();
    let alpha = cols.iter().map(|w| weighted_sum(w, premise)).collect();
    Alignment {
        rows,
        cols,
        beta,
        alpha,
    }
}

struct Alignment {
    rows: Vec<Vec<f64>>,
    cols: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
}

fn mix(eta: f64, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| eta * p + (1.0 - eta) * q)
                .collect()
        })
        .collect()
}

impl ModelParams {
    pub fn zeros(input_dim: usize, hidden: usize, class_count: usize) -> Self {
        ModelParams {
            f: FeedForward::zeros(input_dim, hidden, hidden),
            g: FeedForward::zeros(2 * input_dim, hidden, hidden),
            h: FeedForward::zeros(2 * hidden, hidden, class_count),
            eta_raw: 0.0,
            class_count,
            eta_pin: None,
        }
    }

    /// Glorot-initialized F, G, H (in that order) and `eta_raw = 0`.
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        input_dim: usize,
        hidden: usize,
        class_count: usize,
    ) -> Self {
        let f = FeedForward::init(rng, input_dim, hidden, hidden);
        let g = FeedForward::init(rng, 2 * input_dim, hidden, hidden);
        let h = FeedForward::init(rng, 2 * hidden, hidden, class_count);
        ModelParams {
            f,
            g,
            h,
            eta_raw: 0.0,
            class_count,
            eta_pin: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.f.input
    }

    pub fn hidden(&self) -> usize {
        self.f.hidden
    }

    /// Mixture weight actually used by the forward pass.
    pub fn eta(&self) -> f64 {
        self.eta_pin.unwrap_or_else(|| sigmoid(self.eta_raw))
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = ModelParams::zeros(self.input_dim(), self.hidden(), self.class_count);
        z.eta_pin = self.eta_pin;
        z
    }

    pub fn param_count(&self) -> usize {
        self.f.param_count() + self.g.param_count() + self.h.param_count() + 1
    }

    /// All parameters in a fixed order: F, G, H (w1, b1, w2, b2 each), eta_raw.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for ff in [&self.f, &self.g, &self.h] {
            for (_, t) in ff.tensors() {
                out.extend_from_slice(t);
            }
        }
        out.push(self.eta_raw);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length");
        let mut pos = 0;
        for ff in [&mut self.f, &mut self.g, &mut self.h] {
            for t in ff.tensors_mut() {
                let n = t.len();
                t.copy_from_slice(&flat[pos..pos + n]);
                pos += n;
            }
        }
        self.eta_raw = flat[pos];
    }

    fn check_instance(
        &self,
        premise: &[Vec<f64>],
        hypothesis: &[Vec<f64>],
        awe: Option<&AweVectors>,
    ) -> Result<()> {
        if premise.is_empty() || hypothesis.is_empty() {
            return Err(Error::Empty("sentence has no tokens".into()));
        }
        let d = self.input_dim();
        for v in premise.iter().chain(hypothesis) {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
        }
        if let Some(awe) = awe {
            if awe.u.len() != premise.len() || awe.v.len() != hypothesis.len() {
                return Err(Error::ShapeMismatch(
                    "entailment vectors must align with sentence tokens".into(),
                ));
            }
            let ad = awe.u[0].len();
            if let Some(bad) = awe.u.iter().chain(&awe.v).find(|x| x.len() != ad) {
                return Err(Error::DimensionMismatch {
                    expected: ad,
                    found: bad.len(),
                });
            }
        }
        Ok(())
    }

    /// Class log-probabilities for one instance; the AWE variant is used iff
    /// `awe` is given.
    pub fn forward(
        &self,
        premise: &[Vec<f64>],
        hypothesis: &[Vec<f64>],
        awe: Option<&AweVectors>,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_instance(premise, hypothesis, awe)?;
        Ok(self.forward_unchecked::<rand_chacha::ChaCha8Rng>(premise, hypothesis, awe, None))
    }

    pub(crate) fn forward_unchecked<R: Rng>(
        &self,
        premise: &[Vec<f64>],
        hypothesis: &[Vec<f64>],
        awe: Option<&AweVectors>,
        mut dropout: Option<&mut Dropout<'_, R>>,
    ) -> (Vec<f64>, ForwardCache) {
        let mut mask = |n: usize| dropout.as_mut().and_then(|d| d.mask(n));

        let f_premise: Vec<FfTrace> = premise
            .iter()
            .map(|p| self.f.trace(p, mask(p.len())))
            .collect();
        let f_hypothesis: Vec<FfTrace> = hypothesis
            .iter()
            .map(|h| self.f.trace(h, mask(h.len())))
            .collect();
        let scores: Vec<Vec<f64>> = f_premise
            .iter()
            .map(|fp| {
                f_hypothesis
                    .iter()
                    .map(|fh| dot(&fp.out, &fh.out))
                    .collect()
            })
            .collect();
        let plain = align(&scores, premise, hypothesis);

        let eta = self.eta();
        let (beta_hat, alpha_hat, beta_prime, alpha_prime) = match awe {
            Some(awe) => {
                let ent_scores: Vec<Vec<f64>> = awe
                    .u
                    .iter()
                    .map(|u| awe.v.iter().map(|v| dot(v, u)).collect())
                    .collect();
                let primed = align(&ent_scores, premise, hypothesis);
                (
                    mix(eta, &plain.beta, &primed.beta),
                    mix(eta, &plain.alpha, &primed.alpha),
                    Some(primed.beta),
                    Some(primed.alpha),
                )
            }
            None => (plain.beta.clone(), plain.alpha.clone(), None, None),
        };

        let g_premise: Vec<FfTrace> = premise
            .iter()
            .zip(&beta_hat)
            .map(|(p, b)| {
                let x = concat(p, b);
                let m = mask(x.len());
                self.g.trace(&x, m)
            })
            .collect();
        let g_hypothesis: Vec<FfTrace> = hypothesis
            .iter()
            .zip(&alpha_hat)
            .map(|(h, a)| {
                let x = concat(h, a);
                let m = mask(x.len());
                self.g.trace(&x, m)
            })
            .collect();
        let hidden = self.hidden();
        let mut v1 = vec![0.0; hidden];
        for t in &g_premise {
            axpy(1.0, &t.out, &mut v1);
        }
        let mut v2 = vec![0.0; hidden];
        for t in &g_hypothesis {
            axpy(1.0, &t.out, &mut v2);
        }
        let agg = concat(&v1, &v2);
        let agg_mask = mask(agg.len());
        let h_trace = self.h.trace(&agg, agg_mask);
        let log_probs = log_softmax(&h_trace.out);

        let cache = ForwardCache {
            f_premise,
            f_hypothesis,
            attn_premise: plain.rows,
            attn_hypothesis: plain.cols,
            beta: plain.beta,
            alpha: plain.alpha,
            beta_prime,
            alpha_prime,
            eta,
            g_premise,
            g_hypothesis,
            h_trace,
            log_probs: log_probs.clone(),
        };
        (log_probs, cache)
    }

    /// Backpropagates `d_logits` through one cached forward pass, accumulating
    /// into `grad`. Input vectors and entailment embeddings get no gradient.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn backward(
        &self,
        premise: &[Vec<f64>],
        hypothesis: &[Vec<f64>],
        cache: &ForwardCache,
        d_logits: &[f64],
        grad: &mut ModelParams,
    ) {
        let hidden = self.hidden();
        let d = self.input_dim();
        let d_agg = self.h.backward(&cache.h_trace, d_logits, &mut grad.h);
        let (d_v1, d_v2) = d_agg.split_at(hidden);

        let d_beta_hat: Vec<Vec<f64>> = cache
            .g_premise
            .iter()
            .map(|t| self.g.backward(t, d_v1, &mut grad.g)[d..].to_vec())
            .collect();
        let d_alpha_hat: Vec<Vec<f64>> = cache
            .g_hypothesis
            .iter()
            .map(|t| self.g.backward(t, d_v2, &mut grad.g)[d..].to_vec())
            .collect();

        let eta = cache.eta;
        let (d_beta, d_alpha) = match (&cache.beta_prime, &cache.alpha_prime) {
            (Some(bp), Some(ap)) => {
                if self.eta_pin.is_none() {
                    let mut d_eta = 0.0;
                    for ((g, b), b2) in d_beta_hat.iter().zip(&cache.beta).zip(bp) {
                        d_eta += g
                            .iter()
                            .zip(b)
                            .zip(b2)
                            .map(|((g, x), y)| g * (x - y))
                            .sum::<f64>();
                    }
                    for ((g, a), a2) in d_alpha_hat.iter().zip(&cache.alpha).zip(ap) {
                        d_eta += g
                            .iter()
                            .zip(a)
                            .zip(a2)
                            .map(|((g, x), y)| g * (x - y))
                            .sum::<f64>();
                    }
                    grad.eta_raw += d_eta * eta * (1.0 - eta);
                }
                let scale = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
                    v.iter()
                        .map(|r| r.iter().map(|x| eta * x).collect())
                        .collect()
                };
                (scale(&d_beta_hat), scale(&d_alpha_hat))
            }
            _ => (d_beta_hat, d_alpha_hat),
        };

        // softmax backward into the score matrix
        let (lp, lh) = (premise.len(), hypothesis.len());
        let mut d_scores = vec![vec![0.0; lh]; lp];
        for i in 0..lp {
            let s = &cache.attn_premise[i];
            let ds: Vec<f64> = hypothesis.iter().map(|h| dot(&d_beta[i], h)).collect();
            let inner = dot(s, &ds);
            for j in 0..lh {
                d_scores[i][j] += s[j] * (ds[j] - inner);
            }
        }
        for j in 0..lh {
            let t = &cache.attn_hypothesis[j];
            let dt: Vec<f64> = premise.iter().map(|p| dot(&d_alpha[j], p)).collect();
            let inner = dot(t, &dt);
            for i in 0..lp {
                d_scores[i][j] += t[i] * (dt[i] - inner);
            }
        }

        for i in 0..lp {
            let mut d_fp = vec![0.0; hidden];
            for j in 0..lh {
                axpy(d_scores[i][j], &cache.f_hypothesis[j].out, &mut d_fp);
            }
            self.f.backward(&cache.f_premise[i], &d_fp, &mut grad.f);
        }
        for j in 0..lh {
            let mut d_fh = vec![0.0; hidden];
            for i in 0..lp {
                axpy(d_scores[i][j], &cache.f_premise[i].out, &mut d_fh);
            }
            self.f.backward(&cache.f_hypothesis[j], &d_fh, &mut grad.f);
        }
    }
}

/// Mean cross-entropy over `batch` and its gradient for every parameter.
pub fn loss_and_gradients(params: &ModelParams, batch: &[Instance]) -> Result<(f64, ModelParams)> {
    let refs: Vec<&Instance> = batch.iter().collect();
    batch_loss::<rand_chacha::ChaCha8Rng>(params, &refs, None)
}

pub(crate) fn batch_loss<R: Rng>(
    params: &ModelParams,
    batch: &[&Instance],
    mut dropout: Option<&mut Dropout<'_, R>>,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch is empty".into()));
    }
    for inst in batch {
        if inst.label >= params.class_count {
            return Err(Error::Domain(format!(
                "label {} out of range for {} classes",
                inst.label, params.class_count
            )));
        }
        params.check_instance(&inst.premise, &inst.hypothesis, inst.awe.as_ref())?;
    }
    let n = batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for inst in batch {
        let (log_probs, cache) = params.forward_unchecked(
            &inst.premise,
            &inst.hypothesis,
            inst.awe.as_ref(),
            dropout.as_deref_mut(),
        );
        loss -= log_probs[inst.label];
        let mut d_logits: Vec<f64> = log_probs.iter().map(|lp| lp.exp() / n).collect();
        d_logits[inst.label] -= 1.0 / n;
        params.backward(
            &inst.premise,
            &inst.hypothesis,
            &cache,
            &d_logits,
            &mut grad,
        );
    }
    Ok((loss / n, grad))
}
