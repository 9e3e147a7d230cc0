//! Word-word interaction matrices between a premise and a hypothesis.
//!
//! `I0` is the symmetric cosine interaction over ordinary word vectors, `I1` the
//! asymmetric one over premise-side `u` and hypothesis-side `v` vectors, and
//! `I'` their elementwise maximum. The remaining functions turn a matrix into
//! per-premise-word importance weights, soft alignments and hard alignments.

use crate::error::{Error, Result};
use crate::math::{argmax, dot, norm, softmax};
use crate::trainer::AsymmetricEmbeddings;

/// Floor applied to a row maximum before it enters `1 + max`.
pub const MAX_FLOOR: f64 = -1.0 + 1e-6;

/// `rows x cols` matrix, rows indexed by premise position.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl InteractionMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty(
                "interaction matrix needs non-empty sentences".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("interaction entries must be finite".into()));
        }
        Ok(InteractionMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        InteractionMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> InteractionMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        InteractionMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    fn same_shape(&self, other: &InteractionMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

/// Cosine that maps zero-norm inputs to 0 instead of failing.
fn cosine_or_zero(a: &[f64], b: &[f64]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        (dot(a, b) / denom).clamp(-1.0, 1.0)
    }
}

fn cosine_matrix<P, H>(premise: &[P], hypothesis: &[H]) -> Result<InteractionMatrix>
where
    P: AsRef<[f64]>,
    H: AsRef<[f64]>,
{
    if premise.is_empty() || hypothesis.is_empty() {
        return Err(Error::Empty("interaction needs non-empty sentences".into()));
    }
    let dim = premise[0].as_ref().len();
    let all = premise
        .iter()
        .map(AsRef::as_ref)
        .chain(hypothesis.iter().map(AsRef::as_ref));
    for v in all {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    let mut data = Vec::with_capacity(premise.len() * hypothesis.len());
    for p in premise {
        for h in hypothesis {
            data.push(cosine_or_zero(p.as_ref(), h.as_ref()));
        }
    }
    InteractionMatrix::new(premise.len(), hypothesis.len(), data)
}

/// `I0[i,j] = cos(p_i, h_j)`.
pub fn interaction_sym<P, H>(premise: &[P], hypothesis: &[H]) -> Result<InteractionMatrix>
where
    P: AsRef<[f64]>,
    H: AsRef<[f64]>,
{
    cosine_matrix(premise, hypothesis)
}

/// `I1[i,j] = cos(u(P_i), v(H_j))` with UNK fallback on both sides.
pub fn interaction_ent<S: AsRef<str>>(
    emb: &AsymmetricEmbeddings,
    premise: &[S],
    hypothesis: &[S],
) -> Result<InteractionMatrix> {
    let u: Vec<&[f64]> = premise.iter().map(|t| emb.u(t.as_ref())).collect();
    let v: Vec<&[f64]> = hypothesis.iter().map(|t| emb.v(t.as_ref())).collect();
    cosine_matrix(&u, &v)
}

/// `I'[i,j] = max(I0[i,j], I1[i,j])`.
pub fn interaction_combined(
    i0: &InteractionMatrix,
    i1: &InteractionMatrix,
) -> Result<InteractionMatrix> {
    i0.same_shape(i1)?;
    let data = i0
        .data
        .iter()
        .zip(&i1.data)
        .map(|(a, b)| a.max(*b))
        .collect();
    InteractionMatrix::new(i0.rows, i0.cols, data)
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn row_min(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

fn guarded_denominator(row: &[f64]) -> f64 {
    1.0 + row_max(row).clamp(MAX_FLOOR, 1.0)
}

/// `a_i = 1 / (1 + max_j I0[i,j])`.
pub fn importance_deiste(i0: &InteractionMatrix) -> Vec<f64> {
    (0..i0.rows)
        .map(|i| 1.0 / guarded_denominator(i0.row(i)))
        .collect()
}

/// `a_i = (1 - min_j I1[i,j]) / (1 + max_j I0[i,j])`; words that score high
/// against every hypothesis word are pushed towards zero.
pub fn importance_awe(i0: &InteractionMatrix, i1: &InteractionMatrix) -> Result<Vec<f64>> {
    i0.same_shape(i1)?;
    Ok((0..i0.rows)
        .map(|i| (1.0 - row_min(i1.row(i))) / guarded_denominator(i0.row(i)))
        .collect())
}

/// `p~_i = Σ_j softmax_j(I[i,:]) h_j`.
pub fn soft_align<H: AsRef<[f64]>>(
    i: &InteractionMatrix,
    hypothesis: &[H],
) -> Result<Vec<Vec<f64>>> {
    if hypothesis.is_empty() {
        return Err(Error::Empty(
            "soft alignment needs a non-empty hypothesis".into(),
        ));
    }
    if hypothesis.len() != i.cols {
        return Err(Error::ShapeMismatch(format!(
            "{} hypothesis vectors for {} matrix columns",
            hypothesis.len(),
            i.cols
        )));
    }
    let dim = hypothesis[0].as_ref().len();
    if let Some(bad) = hypothesis.iter().find(|h| h.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.as_ref().len(),
        });
    }
    Ok((0..i.rows)
        .map(|r| {
            let weights = softmax(i.row(r));
            let mut out = vec![0.0; dim];
            for (w, h) in weights.iter().zip(hypothesis) {
                for (o, x) in out.iter_mut().zip(h.as_ref()) {
                    *o += w * x;
                }
            }
            out
        })
        .collect())
}

/// `x_i = argmax_j I[i,j]`, lowest index on ties.
pub fn hard_best_match(i: &InteractionMatrix) -> Vec<usize> {
    (0..i.rows).map(|r| argmax(i.row(r))).collect()
}
