//! In-memory pipeline stages shared by the commands, the examples and the
//! experiment tests.

use std::collections::HashSet;

use crate::bm25::{default_stopwords, Bm25Index, DEFAULT_B, DEFAULT_K1};
use crate::corpus::{generate_synthetic_corpus, load_corpus, CorpusBundle, Product};
use crate::dataset::{augment_category_wise, build_triplets, decompose_positive_pairs, TripletDataset};
use crate::encoder::{train, EncoderParams, TextEncoder, TrainOutput};
use crate::error::Result;
use crate::eval::{build_eval_tasks, run_offline_eval, CategoryRow, EvalMode, EvalReport, EvalTask};
use crate::retrieval::build_embedding_index;
use crate::text::{build_vocab, render_product, Vocabulary};

use super::config::RunConfig;

/// Seed of the full augmentation that defines the precision probe tasks.
const PROBE_SEED: u64 = 0x5052_4f42;

pub fn load_or_generate(cfg: &RunConfig) -> Result<CorpusBundle> {
    match (&cfg.products, &cfg.collections) {
        (Some(p), Some(c)) => load_corpus(p, c),
        _ => generate_synthetic_corpus(&cfg.corpus),
    }
}

pub fn bm25_over(products: &[Product]) -> Result<Bm25Index> {
    Bm25Index::build(
        products
            .iter()
            .map(|p| (p.product_id.clone(), render_product(p), p.leaf_category().to_string())),
        DEFAULT_K1,
        DEFAULT_B,
    )
}

/// Training inputs derived from one corpus.
pub struct Prepared {
    /// Corpus with the configured share of collections split by category.
    pub augmented: CorpusBundle,
    pub vocab: Vocabulary,
    /// Index over every product, used for hard negatives.
    pub bm25: Bm25Index,
    pub dataset: TripletDataset,
}

pub fn prepare(cfg: &RunConfig, bundle: &CorpusBundle) -> Result<Prepared> {
    let seeds = cfg.seeds();
    let augmented = bundle.with_collections(augment_category_wise(bundle, cfg.aug_ratio, seeds.augmentation)?)?;
    let vocab = build_vocab(&augmented, cfg.vocab_min_freq)?;
    let bm25 = bm25_over(&bundle.products)?;
    let pairs = decompose_positive_pairs(&augmented, None, seeds.pairs);
    let mut dataset = build_triplets(&pairs, &augmented, &bm25, &cfg.negatives())?;
    dataset.provenance.aug_ratio = cfg.aug_ratio;
    Ok(Prepared { augmented, vocab, bm25, dataset })
}

/// The fixed evaluation protocol for one corpus. Recall tasks come from the
/// original collections; precision probes come from splitting every
/// collection by category, so both sets are the same whatever ratio a model
/// was trained with.
pub struct EvalSuite {
    pub eval_products: Vec<Product>,
    pub recall_tasks: Vec<EvalTask>,
    pub probe_tasks: Vec<EvalTask>,
    pub bm25: Bm25Index,
    pub k: usize,
}

pub fn eval_suite(cfg: &RunConfig, bundle: &CorpusBundle) -> Result<EvalSuite> {
    let (eval_products, recall_tasks) = build_eval_tasks(bundle, cfg.eval.min_review_count, cfg.eval.min_gt)?;
    let probes = bundle.with_collections(augment_category_wise(bundle, 1.0, PROBE_SEED)?)?;
    let (_, probe_tasks) = build_eval_tasks(&probes, cfg.eval.min_review_count, cfg.eval.min_gt)?;
    let probe_tasks = probe_tasks.into_iter().filter(|t| t.c_gt.is_some()).collect();
    let bm25 = bm25_over(&eval_products)?;
    Ok(EvalSuite { eval_products, recall_tasks, probe_tasks, bm25, k: cfg.eval.k })
}

/// Recall rows from the recall report, precision from the probe report.
fn merge(recall: EvalReport, probe: EvalReport) -> EvalReport {
    let mut rows: std::collections::BTreeMap<String, CategoryRow> =
        recall.rows.into_iter().map(|r| (r.category.clone(), CategoryRow { precision: None, n_precision_tasks: 0, ..r })).collect();
    for p in probe.rows {
        rows.entry(p.category.clone())
            .and_modify(|r| {
                r.precision = p.precision;
                r.n_precision_tasks = p.n_precision_tasks;
            })
            .or_insert(CategoryRow { n_tasks: 0, recall: 0.0, ..p });
    }
    EvalReport {
        rows: rows.into_values().collect(),
        avg_precision: probe.avg_precision,
        capped_tasks: recall.capped_tasks,
        ..recall
    }
}

impl EvalSuite {
    pub fn evaluate_encoder(&self, encoder: &(dyn TextEncoder + Sync), vocab: &Vocabulary) -> Result<EvalReport> {
        let index = build_embedding_index(encoder, vocab, &self.eval_products)?;
        let mode = EvalMode::Encoder { encoder, vocab, index: &index };
        Ok(merge(run_offline_eval(&mode, &self.recall_tasks, self.k)?, run_offline_eval(&mode, &self.probe_tasks, self.k)?))
    }

    /// Lexical baseline: title stopwords removed and the trailing date dropped.
    pub fn evaluate_bm25(&self) -> Result<EvalReport> {
        let stopwords: HashSet<String> = default_stopwords();
        let mode = EvalMode::Bm25 { index: &self.bm25, stopwords: &stopwords, drop_date: true };
        Ok(merge(run_offline_eval(&mode, &self.recall_tasks, self.k)?, run_offline_eval(&mode, &self.probe_tasks, self.k)?))
    }
}

/// One evaluation point recorded during training.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub recall: f64,
    pub precision: Option<f64>,
}

pub struct Trained {
    pub output: TrainOutput,
    pub eval_curve: Vec<CurvePoint>,
}

/// Trains and, when `suite` is given, evaluates at every interval.
pub fn train_with_eval(
    cfg: &RunConfig,
    dataset: &TripletDataset,
    vocab: &Vocabulary,
    suite: Option<&EvalSuite>,
) -> Result<Trained> {
    let mut eval_curve = Vec::new();
    let mut failure = None;
    let mut hook = |step: usize, params: &EncoderParams| {
        if let Some(suite) = suite {
            match suite.evaluate_encoder(params, vocab) {
                Ok(r) => eval_curve.push(CurvePoint { step, recall: r.avg_recall, precision: r.avg_precision }),
                Err(e) => failure = Some(e),
            }
        }
    };
    let output = train(dataset, vocab, &cfg.train, Some(&mut hook))?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Trained { output, eval_curve })
}

/// Result of [`run_experiment`].
pub struct Experiment {
    pub prepared: Prepared,
    pub trained: Trained,
    pub encoder_report: EvalReport,
    pub bm25_report: EvalReport,
}

/// Corpus, dataset, training and both evaluations, without touching disk.
pub fn run_experiment(cfg: &RunConfig, bundle: &CorpusBundle, curve: bool) -> Result<Experiment> {
    cfg.validate()?;
    let prepared = prepare(cfg, bundle)?;
    let suite = eval_suite(cfg, bundle)?;
    let trained = train_with_eval(cfg, &prepared.dataset, &prepared.vocab, curve.then_some(&suite))?;
    let step = cfg.train.max_steps;
    let encoder_report = suite
        .evaluate_encoder(&trained.output.params, &prepared.vocab)?
        .with_identity(cfg.model_name(), step);
    let bm25_report = suite.evaluate_bm25()?.with_identity("BM25", 0);
    Ok(Experiment { prepared, trained, encoder_report, bm25_report })
}
