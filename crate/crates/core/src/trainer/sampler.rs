//! Negative sampling from the hypothesis-side word distribution of the pair set.

use rand::Rng;

use crate::error::{Error, Result};

/// Walker/Vose alias table over `n` outcomes.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    /// Builds the table from non-negative weights with a positive sum.
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::Empty(
                "alias table needs at least one outcome".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain(
                "alias weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("alias weights sum to zero".into()));
        }

        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let mut small = Vec::new();
        let mut large = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
            alias[i] = i;
        }
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Draws hypothesis-side word ids with probability proportional to
/// `count^exponent`. The hypothesis UNK row is not an outcome.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    probabilities: Vec<f64>,
    table: AliasTable,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], exponent: f64) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::Domain(
                "every sampled word needs a positive count".into(),
            ));
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(exponent)).collect();
        let total: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / total).collect();
        Ok(NegativeSampler {
            probabilities,
            table: AliasTable::new(&weights)?,
        })
    }

    /// Normalized sampling distribution.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.table.sample(rng)
    }

    /// Up to `k` draws that differ from `positive`. Each slot is redrawn on a
    /// collision at most `MAX_ATTEMPTS` times, then left empty.
    pub fn draw_negatives<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        k: usize,
        positive: usize,
        out: &mut Vec<usize>,
    ) {
        const MAX_ATTEMPTS: usize = 100;
        out.clear();
        for _ in 0..k {
            for _ in 0..MAX_ATTEMPTS {
                let c = self.sample(rng);
                if c != positive {
                    out.push(c);
                    break;
                }
            }
        }
    }
}
