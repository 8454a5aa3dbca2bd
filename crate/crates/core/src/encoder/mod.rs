//! Mean-pooled token-embedding encoder and the triplet margin objective.
//!
//! The encoder is a trainable `vocab_size × d` table; a text embeds to the
//! arithmetic mean of its token rows. Anything implementing [`TextEncoder`]
//! can stand in for it at serving time.

mod checkpoint;
mod gradcheck;
mod train;

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TokenSequence;
use crate::util;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_loss_curve, CheckpointHeader};
pub use gradcheck::{finite_diff_check, GradCheck};
pub use train::{train, Checkpoint, EvalHook, Optimizer, TrainConfig, TrainOutput};

/// Distances below this are treated as zero when differentiating a norm.
pub const DISTANCE_EPSILON: f64 = 1e-12;

pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl Deref for EmbeddingVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(v: Vec<f64>) -> Self {
        EmbeddingVector(v)
    }
}

impl EmbeddingVector {
    pub fn zeros(d: usize) -> Self {
        EmbeddingVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

pub trait TextEncoder {
    fn dim(&self) -> usize;
    fn embed(&self, tokens: &TokenSequence) -> Result<EmbeddingVector>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    vocab_size: usize,
    dim: usize,
    seed: u64,
    table: Vec<f64>,
}

/// Seeded uniform initialization in `[-0.05, 0.05]`.
pub fn init_encoder(vocab_size: usize, d: usize, seed: u64) -> Result<EncoderParams> {
    if vocab_size < 3 {
        return Err(Error::config("vocab_size", "must be at least 3"));
    }
    if d < 2 {
        return Err(Error::config("d", "embedding dimension must be at least 2"));
    }
    let mut rng = util::rng(seed);
    let table = (0..vocab_size * d)
        .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
        .collect();
    Ok(EncoderParams { vocab_size, dim: d, seed, table })
}

impl EncoderParams {
    pub fn from_table(vocab_size: usize, dim: usize, seed: u64, table: Vec<f64>) -> Result<Self> {
        if table.len() != vocab_size * dim {
            return Err(Error::DimensionMismatch {
                expected: vocab_size * dim,
                actual: table.len(),
            });
        }
        Ok(EncoderParams { vocab_size, dim, seed, table })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.table[start..start + self.dim]
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        match ids.iter().find(|&&id| id as usize >= self.vocab_size) {
            Some(id) => Err(Error::Lookup(format!("token id {id}"))),
            None => Ok(()),
        }
    }

    /// Mean of the token rows; the empty sequence pools to zero.
    pub fn embed_ids(&self, ids: &[u32]) -> Result<EmbeddingVector> {
        self.check_ids(ids)?;
        let mut out = vec![0.0; self.dim];
        if ids.is_empty() {
            log::debug!("embedding an empty token sequence as the zero vector");
            return Ok(EmbeddingVector(out));
        }
        mean_pool_into(&self.table, self.dim, ids, &mut out);
        Ok(EmbeddingVector(out))
    }
}

impl TextEncoder for EncoderParams {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, tokens: &TokenSequence) -> Result<EmbeddingVector> {
        self.embed_ids(&tokens.ids)
    }
}

pub fn embed(params: &EncoderParams, tokens: &TokenSequence) -> Result<EmbeddingVector> {
    params.embed(tokens)
}

pub(crate) fn mean_pool_into(table: &[f64], dim: usize, ids: &[u32], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    if ids.is_empty() {
        return;
    }
    for &id in ids {
        let row = &table[id as usize * dim..(id as usize + 1) * dim];
        for (o, r) in out.iter_mut().zip(row) {
            *o += r;
        }
    }
    let inv = 1.0 / ids.len() as f64;
    out.iter_mut().for_each(|x| *x *= inv);
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims(q: &[f64], p: &[f64], n: &[f64]) -> Result<()> {
    for other in [p, n] {
        if other.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: other.len(),
            });
        }
    }
    Ok(())
}

/// `max(0, ‖q − p‖ − ‖q − n‖ + margin)` with Euclidean distances.
pub fn triplet_loss(q: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<f64> {
    check_dims(q, p, n)?;
    Ok((distance(q, p) - distance(q, n) + margin).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub query: EmbeddingVector,
    pub positive: EmbeddingVector,
    pub negative: EmbeddingVector,
}

/// Gradient of [`triplet_loss`] with respect to each embedding.
///
/// Inactive triplets (loss exactly 0) get zero gradients. A distance below
/// [`DISTANCE_EPSILON`] contributes no gradient term.
pub fn triplet_loss_grad(q: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<TripletGrad> {
    check_dims(q, p, n)?;
    let d = q.len();
    let mut gq = vec![0.0; d];
    let mut gp = vec![0.0; d];
    let mut gn = vec![0.0; d];
    let dp = distance(q, p);
    let dn = distance(q, n);
    if dp - dn + margin > 0.0 {
        if dp >= DISTANCE_EPSILON {
            for i in 0..d {
                gp[i] = -(q[i] - p[i]) / dp;
            }
        }
        if dn >= DISTANCE_EPSILON {
            for i in 0..d {
                gn[i] = (q[i] - n[i]) / dn;
            }
        }
        for i in 0..d {
            gq[i] = -gp[i] - gn[i];
        }
    }
    Ok(TripletGrad {
        query: gq.into(),
        positive: gp.into(),
        negative: gn.into(),
    })
}

/// Backpropagates a gradient through L2 normalization: given `v` and the
/// gradient `g` at `v / ‖v‖`, returns the gradient at `v`.
pub(crate) fn normalize_backward(v: &[f64], g: &[f64], out: &mut [f64]) {
    let len = norm(v);
    if len < DISTANCE_EPSILON {
        out.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let dot: f64 = v.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / len;
    for i in 0..v.len() {
        out[i] = (g[i] - v[i] / len * dot) / len;
    }
}

pub(crate) fn normalize_in_place(v: &mut [f64]) {
    let len = norm(v);
    if len >= DISTANCE_EPSILON {
        v.iter_mut().for_each(|x| *x /= len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_encoder(10, 4, 1).unwrap();
        assert_eq!(a, init_encoder(10, 4, 1).unwrap());
        assert!(a.table().iter().all(|x| x.abs() <= INIT_RANGE));
        assert!(matches!(init_encoder(10, 1, 1), Err(Error::Config { .. })));
        assert!(init_encoder(2, 4, 1).is_err());
    }

    #[test]
    fn mean_pooling() {
        let p = EncoderParams::from_table(3, 2, 0, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.embed_ids(&[1]).unwrap().0, vec![1.0, 0.0]);
        assert_eq!(p.embed_ids(&[1, 2]).unwrap().0, vec![0.5, 0.5]);
        assert_eq!(p.embed_ids(&[2, 1]).unwrap(), p.embed_ids(&[1, 2]).unwrap());
        assert_eq!(p.embed_ids(&[]).unwrap().0, vec![0.0, 0.0]);
        assert!(matches!(p.embed_ids(&[3]), Err(Error::Lookup(_))));
    }

    #[test]
    fn analytic_losses() {
        assert_eq!(triplet_loss(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap(), 0.0);
        assert_eq!(triplet_loss(&[0.0, 0.0], &[3.0, 4.0], &[6.0, 8.0], 1.0).unwrap(), 0.0);
        assert_eq!(triplet_loss(&[0.0, 0.0], &[6.0, 8.0], &[3.0, 4.0], 1.0).unwrap(), 6.0);
        assert!(triplet_loss(&[0.0], &[0.0, 1.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn analytic_gradient() {
        let g = triplet_loss_grad(&[0.0, 0.0], &[6.0, 8.0], &[3.0, 4.0], 1.0).unwrap();
        assert_eq!(g.positive.0, vec![0.6, 0.8]);
        assert_eq!(g.negative.0, vec![-0.6, -0.8]);
        assert_eq!(g.query.0, vec![0.0, 0.0]);
        // central differences at eps 1e-5
        let eps = 1e-5;
        let base = ([0.0, 0.0], [6.0, 8.0], [3.0, 4.0]);
        for i in 0..2 {
            let mut hi = base.1;
            let mut lo = base.1;
            hi[i] += eps;
            lo[i] -= eps;
            let num = (triplet_loss(&base.0, &hi, &base.2, 1.0).unwrap()
                - triplet_loss(&base.0, &lo, &base.2, 1.0).unwrap())
                / (2.0 * eps);
            assert!((num - g.positive[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn inactive_and_singular_gradients() {
        let g = triplet_loss_grad(&[0.0, 0.0], &[3.0, 4.0], &[6.0, 8.0], 1.0).unwrap();
        assert!(g.query.iter().chain(g.positive.iter()).chain(g.negative.iter()).all(|&x| x == 0.0));
        let g = triplet_loss_grad(&[1.0, 1.0], &[1.0, 1.0], &[1.5, 1.0], 1.0).unwrap();
        assert_eq!(g.positive.0, vec![0.0, 0.0]);
        assert_eq!(g.negative.0, vec![-1.0, 0.0]);
        assert_eq!(g.query.0, vec![1.0, 0.0]);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, 3)
    }

    proptest! {
        #[test]
        fn loss_is_nonnegative(q in vec3(), p in vec3(), n in vec3(), m in 0.01f64..3.0) {
            prop_assert!(triplet_loss(&q, &p, &n, m).unwrap() >= 0.0);
        }

        #[test]
        fn zero_loss_criterion(q in vec3(), p in vec3(), n in vec3(), m in 0.01f64..3.0) {
            let loss = triplet_loss(&q, &p, &n, m).unwrap();
            prop_assert_eq!(loss == 0.0, distance(&q, &n) >= distance(&q, &p) + m);
        }

        #[test]
        fn translation_invariance(q in vec3(), p in vec3(), n in vec3(), t in vec3()) {
            let shift = |v: &[f64]| v.iter().zip(&t).map(|(a, b)| a + b).collect::<Vec<_>>();
            let a = triplet_loss(&q, &p, &n, 1.0).unwrap();
            let b = triplet_loss(&shift(&q), &shift(&p), &shift(&n), 1.0).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
