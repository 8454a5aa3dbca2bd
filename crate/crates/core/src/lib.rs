//! Intent-based product collections.
//!
//! An end-to-end, desk-scale engine that turns expert-curated product
//! collections into triplet training data, trains a mean-pooled text encoder
//! with a Euclidean triplet margin loss, serves exact cosine top-k retrieval,
//! and evaluates retrieval with Recall@K / Precision@K alongside online-metric
//! calculators.
//!
//! The pipeline, module by module:
//!
//! - [`corpus`]: products, collections, loading, and a seeded synthetic
//!   generator with planted intent ground truth.
//! - [`text`]: vocabulary, tokenizer, and query/product text rendering.
//! - [`bm25`]: Okapi BM25 inverted index, lexical baseline, hard-negative
//!   sampler.
//! - [`dataset`]: positive pairs, category-wise augmentation, triplets.
//! - [`encoder`]: embedding table, triplet loss and gradients, trainer.
//! - [`retrieval`]: normalized embedding index and cosine top-k.
//! - [`eval`]: offline recall/precision protocol, online metrics, reordering.
//! - [`cli`]: run configuration, presets, command implementations, HTTP service.
//!
//! Runnable walkthroughs live in `examples/`; see the README for the list.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bm25;
pub mod cli;
pub mod corpus;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod retrieval;
pub mod text;

pub(crate) mod util;

pub use error::{Error, Result};
