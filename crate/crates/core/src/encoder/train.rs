use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    init_encoder, mean_pool_into, normalize_backward, normalize_in_place, triplet_loss_grad,
    EncoderParams,
};
use crate::dataset::TripletDataset;
use crate::error::{Error, Result};
use crate::text::{tokenize, Vocabulary};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub eval_interval: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub dim: usize,
    pub seed: u64,
    /// L2-normalize pooled embeddings before the loss.
    pub normalize_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 1.0,
            batch_size: 55,
            max_steps: 5_000,
            eval_interval: 1_000,
            learning_rate: 3e-2,
            optimizer: Optimizer::adam(),
            dim: 64,
            seed: 7,
            normalize_embeddings: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::config("margin", "must be positive"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.eval_interval < 1 || (self.max_steps > 0 && self.eval_interval > self.max_steps) {
            return Err(Error::config("eval_interval", "must lie in [1, max_steps]"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.dim < 2 {
            return Err(Error::config("dim", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub params: EncoderParams,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: EncoderParams,
    /// `(step, mean batch loss)`; the loss at step `s` is measured before the
    /// `s`-th update.
    pub curve: Vec<(usize, f64)>,
    pub checkpoints: Vec<Checkpoint>,
}

/// Token-id sequences for each distinct text plus triplets as text indices.
struct Tokenized {
    seqs: Vec<Vec<u32>>,
    triplets: Vec<[usize; 3]>,
}

fn tokenize_dataset<'a>(ds: &'a TripletDataset, vocab: &Vocabulary) -> Tokenized {
    let mut lookup: HashMap<&'a str, usize> = HashMap::new();
    let mut seqs: Vec<Vec<u32>> = Vec::new();
    let mut triplets = Vec::with_capacity(ds.examples.len());
    for e in &ds.examples {
        let mut t = [0usize; 3];
        for (slot, text) in t.iter_mut().zip([&*e.query_text, &*e.positive_text, &*e.negative_text]) {
            *slot = *lookup.entry(text).or_insert_with(|| {
                seqs.push(tokenize(text, vocab).ids);
                seqs.len() - 1
            });
        }
        triplets.push(t);
    }
    Tokenized { seqs, triplets }
}

/// Per-step scratch buffers and the sparse gradient accumulator.
pub(crate) struct GradBuffer {
    pub(crate) grad: Vec<f64>,
    touched: Vec<u32>,
    is_touched: Vec<bool>,
    dim: usize,
}

impl GradBuffer {
    pub(crate) fn new(vocab_size: usize, dim: usize) -> Self {
        GradBuffer {
            grad: vec![0.0; vocab_size * dim],
            touched: Vec::new(),
            is_touched: vec![false; vocab_size],
            dim,
        }
    }

    fn add_pooled(&mut self, ids: &[u32], g: &[f64], scale: f64) {
        if ids.is_empty() {
            return;
        }
        let w = scale / ids.len() as f64;
        for &id in ids {
            let i = id as usize;
            if !self.is_touched[i] {
                self.is_touched[i] = true;
                self.touched.push(id);
            }
            let row = &mut self.grad[i * self.dim..(i + 1) * self.dim];
            for (r, x) in row.iter_mut().zip(g) {
                *r += w * x;
            }
        }
    }

    pub(crate) fn touched(&self) -> &[u32] {
        &self.touched
    }

    fn clear(&mut self) {
        for &id in &self.touched {
            let i = id as usize;
            self.is_touched[i] = false;
            self.grad[i * self.dim..(i + 1) * self.dim].iter_mut().for_each(|x| *x = 0.0);
        }
        self.touched.clear();
    }
}

/// Loss of one triplet and its gradient accumulated (times `scale`) into `buf`.
pub(crate) fn accumulate_triplet(
    params: &EncoderParams,
    ids: [&[u32]; 3],
    margin: f64,
    normalize: bool,
    scale: f64,
    buf: &mut GradBuffer,
) -> f64 {
    let dim = params.dim;
    let mut e = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    for (out, seq) in e.iter_mut().zip(ids) {
        mean_pool_into(&params.table, dim, seq, out);
    }
    let raw = e.clone();
    if normalize {
        e.iter_mut().for_each(|v| normalize_in_place(v));
    }
    let [q, p, n] = &e;
    let loss = (super::distance(q, p) - super::distance(q, n) + margin).max(0.0);
    if loss == 0.0 {
        return 0.0;
    }
    let g = triplet_loss_grad(q, p, n, margin).expect("equal dims");
    let mut grads = [g.query.0, g.positive.0, g.negative.0];
    if normalize {
        let mut tmp = vec![0.0; dim];
        for (grad, v) in grads.iter_mut().zip(&raw) {
            normalize_backward(v, grad, &mut tmp);
            grad.copy_from_slice(&tmp);
        }
    }
    for (seq, grad) in ids.iter().zip(&grads) {
        buf.add_pooled(seq, grad, scale);
    }
    loss
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Called with `(step, params)` every `eval_interval` steps.
pub type EvalHook<'a> = &'a mut dyn FnMut(usize, &EncoderParams);

/// Trains the embedding table on triplets with the margin loss.
///
/// Deterministic for a fixed config: the epoch order is a seeded shuffle and
/// the batch gradient is accumulated serially.
pub fn train(
    ds: &TripletDataset,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
    mut eval_hook: Option<EvalHook<'_>>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::config("dataset", "training needs at least one triplet"));
    }
    let mut params = init_encoder(vocab.len(), cfg.dim, cfg.seed)?;
    let mut curve = Vec::with_capacity(cfg.max_steps);
    let mut checkpoints = Vec::new();
    if cfg.max_steps == 0 {
        return Ok(TrainOutput { params, curve, checkpoints });
    }

    let data = tokenize_dataset(ds, vocab);
    let mut rng = util::rng(util::mix_seed(cfg.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..data.triplets.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut buf = GradBuffer::new(vocab.len(), cfg.dim);
    let mut adam = AdamState {
        m: vec![0.0; params.table.len()],
        v: vec![0.0; params.table.len()],
        t: 0,
    };
    let scale = 1.0 / cfg.batch_size as f64;

    for step in 0..cfg.max_steps {
        let mut loss_sum = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let [q, p, n] = data.triplets[order[cursor]];
            cursor += 1;
            loss_sum += accumulate_triplet(
                &params,
                [&data.seqs[q], &data.seqs[p], &data.seqs[n]],
                cfg.margin,
                cfg.normalize_embeddings,
                scale,
                &mut buf,
            );
        }
        curve.push((step, loss_sum * scale));
        apply_update(&mut params, &mut buf, &mut adam, cfg);
        buf.clear();

        let done = step + 1;
        if done % cfg.eval_interval == 0 || done == cfg.max_steps {
            if let Some(hook) = eval_hook.as_mut() {
                hook(done, &params);
            }
            checkpoints.push(Checkpoint { step: done, params: params.clone() });
        }
    }
    Ok(TrainOutput { params, curve, checkpoints })
}

fn apply_update(params: &mut EncoderParams, buf: &mut GradBuffer, adam: &mut AdamState, cfg: &TrainConfig) {
    let lr = cfg.learning_rate;
    let dim = cfg.dim;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for &id in buf.touched() {
                let range = id as usize * dim..(id as usize + 1) * dim;
                for (w, g) in params.table[range.clone()].iter_mut().zip(&buf.grad[range]) {
                    *w -= lr * g;
                }
            }
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            adam.t += 1;
            let bc1 = 1.0 - beta1.powi(adam.t);
            let bc2 = 1.0 - beta2.powi(adam.t);
            for i in 0..params.table.len() {
                let g = buf.grad[i];
                let m = &mut adam.m[i];
                let v = &mut adam.v[i];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                if *m != 0.0 {
                    params.table[i] -= lr * (*m / bc1) / ((*v / bc2).sqrt() + epsilon);
                }
            }
        }
    }
}
