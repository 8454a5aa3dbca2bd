//! Command implementations. Each reads and writes fixed paths under the
//! output directory (see [`Layout`]) and records a manifest of what it read
//! and wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{corpus_stats, CorpusBundle, CorpusStats};
use crate::dataset::{dataset_stats, DatasetStats, TripletDataset};
use crate::encoder::{load_checkpoint, save_checkpoint, write_loss_curve, CheckpointHeader, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::retrieval::{build_embedding_index, embed_query, EmbeddingIndex};
use crate::text::Vocabulary;
use crate::util;

use super::config::{RunConfig, Seeds};
use super::pipeline::{eval_suite, load_or_generate, prepare, train_with_eval, CurvePoint};
use super::report;

/// Artifact paths under one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn vocab(&self) -> PathBuf {
        self.root.join("vocab.txt")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.jsonl")
    }

    pub fn dataset_stats(&self) -> PathBuf {
        self.root.join("dataset_stats.json")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("checkpoint.bin")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn loss_curve(&self) -> PathBuf {
        self.root.join("loss_curve.csv")
    }

    pub fn eval_curve(&self) -> PathBuf {
        self.root.join("eval_curve.csv")
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index.bin")
    }

    /// `report_<model>.csv`; the text table sits next to it as `.txt`.
    pub fn report(&self, model: &str) -> PathBuf {
        self.root.join(format!("report_{model}.csv"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn manifest(&self, command: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{command}.json"))
    }
}

/// What a command run depended on and produced. Paths under the output
/// directory are stored relative to it, so two output directories built from
/// the same config carry identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(util::open_existing(path)?)?)
    }
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(util::sha256_hex(&bytes))
}

fn write_manifest(layout: &Layout, cfg: &RunConfig, command: &str, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<()> {
    let key = |p: &Path| {
        p.strip_prefix(&layout.root)
            .map(|r| r.display().to_string())
            .unwrap_or_else(|_| p.display().to_string())
    };
    let hashes = |paths: &[PathBuf]| -> Result<BTreeMap<String, String>> {
        paths.iter().map(|p| Ok((key(p), file_hash(p)?))).collect()
    };
    let manifest = Manifest {
        command: command.to_string(),
        config_hash: cfg.hash(),
        seeds: cfg.seeds(),
        inputs: hashes(inputs)?,
        outputs: hashes(outputs)?,
    };
    let path = layout.manifest(command);
    std::fs::create_dir_all(path.parent().expect("manifest dir"))?;
    let mut body = serde_json::to_vec_pretty(&manifest)?;
    body.push(b'\n');
    std::fs::write(path, body)?;
    Ok(())
}

fn corpus_files(layout: &Layout) -> Vec<PathBuf> {
    let dir = layout.corpus_dir();
    let mut files = vec![dir.join("products.jsonl"), dir.join("collections.jsonl")];
    if dir.join("planted_truth.json").exists() {
        files.push(dir.join("planted_truth.json"));
    }
    files
}

fn read_corpus(layout: &Layout) -> Result<CorpusBundle> {
    CorpusBundle::read_dir(&layout.corpus_dir())
}

/// Loads the checkpoint and vocabulary and checks they belong together.
fn read_model(layout: &Layout) -> Result<(CheckpointHeader, EncoderParams, Vocabulary)> {
    let (header, params) = load_checkpoint(&layout.checkpoint())?;
    let vocab = Vocabulary::load(&layout.vocab())?;
    if header.vocab_fingerprint != vocab.fingerprint() {
        return Err(Error::Artifact {
            path: layout.checkpoint(),
            message: format!("trained with a different vocabulary than {}", layout.vocab().display()),
        });
    }
    Ok((header, params, vocab))
}

/// Generates (or loads) the corpus into `corpus/`.
pub fn cmd_gen_corpus(cfg: &RunConfig) -> Result<CorpusStats> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let bundle = load_or_generate(cfg)?;
    bundle.write_dir(&layout.corpus_dir())?;
    let inputs: Vec<PathBuf> = cfg.products.iter().chain(&cfg.collections).cloned().collect();
    write_manifest(&layout, cfg, "gen-corpus", &inputs, &corpus_files(&layout))?;
    Ok(corpus_stats(&bundle))
}

/// Augments, builds the vocabulary and writes the triplet dataset.
pub fn cmd_build_dataset(cfg: &RunConfig) -> Result<DatasetStats> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let bundle = read_corpus(&layout)?;
    let prepared = prepare(cfg, &bundle)?;
    prepared.dataset.save(&layout.dataset())?;
    prepared.vocab.save(&layout.vocab())?;
    let stats = dataset_stats(&prepared.dataset);
    std::fs::write(layout.dataset_stats(), serde_json::to_vec_pretty(&stats)?)?;
    write_manifest(
        &layout,
        cfg,
        "build-dataset",
        &corpus_files(&layout),
        &[layout.dataset(), layout.vocab(), layout.dataset_stats()],
    )?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub first_loss: Option<f64>,
    pub last_loss: Option<f64>,
    pub eval_curve: Vec<CurvePoint>,
}

/// Trains on `dataset.jsonl`. When the corpus is present the model is also
/// evaluated at every interval, which feeds the report curves.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let dataset = TripletDataset::load(&layout.dataset())?;
    let vocab = Vocabulary::load(&layout.vocab())?;
    let mut inputs = vec![layout.dataset(), layout.vocab()];
    let suite = if layout.corpus_dir().join("products.jsonl").exists() {
        inputs.extend(corpus_files(&layout));
        Some(eval_suite(cfg, &read_corpus(&layout)?)?)
    } else {
        None
    };
    let trained = train_with_eval(cfg, &dataset, &vocab, suite.as_ref())?;
    let out = &trained.output;

    let fingerprint = vocab.fingerprint();
    save_checkpoint(&layout.checkpoint(), &out.params, fingerprint, cfg.train.max_steps)?;
    let mut outputs = vec![layout.checkpoint(), layout.loss_curve(), layout.eval_curve()];
    std::fs::create_dir_all(layout.checkpoints_dir())?;
    for c in &out.checkpoints {
        let path = layout.checkpoints_dir().join(format!("step_{:06}.bin", c.step));
        save_checkpoint(&path, &c.params, fingerprint, c.step)?;
        outputs.push(path);
    }
    write_loss_curve(&layout.loss_curve(), &out.curve)?;
    report::write_eval_curve(&layout.eval_curve(), &trained.eval_curve)?;
    write_manifest(&layout, cfg, "train", &inputs, &outputs)?;
    Ok(TrainSummary {
        steps: cfg.train.max_steps,
        first_loss: out.curve.first().map(|c| c.1),
        last_loss: out.curve.last().map(|c| c.1),
        eval_curve: trained.eval_curve,
    })
}

/// Embeds every catalog product with the trained checkpoint.
pub fn cmd_index(cfg: &RunConfig) -> Result<EmbeddingIndex> {
    let layout = Layout::new(&cfg.out);
    let (_, params, vocab) = read_model(&layout)?;
    let bundle = read_corpus(&layout)?;
    let index = build_embedding_index(&params, &vocab, &bundle.products)?;
    if !index.flagged().is_empty() {
        log::warn!("{} product(s) embedded to the zero vector", index.flagged().len());
    }
    index.save(&layout.index())?;
    let mut inputs = vec![layout.checkpoint(), layout.vocab()];
    inputs.extend(corpus_files(&layout));
    write_manifest(&layout, cfg, "index", &inputs, &[layout.index()])?;
    Ok(index)
}

fn write_report(layout: &Layout, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let csv = layout.report(&report.model);
    let table = csv.with_extension("txt");
    std::fs::write(&csv, report.to_csv())?;
    std::fs::write(&table, report.to_table())?;
    Ok(vec![csv, table])
}

/// Offline evaluation of the trained checkpoint.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let (header, params, vocab) = read_model(&layout)?;
    let bundle = read_corpus(&layout)?;
    let suite = eval_suite(cfg, &bundle)?;
    let report = suite.evaluate_encoder(&params, &vocab)?.with_identity(cfg.model_name(), header.step);
    let outputs = write_report(&layout, &report)?;
    let mut inputs = vec![layout.checkpoint(), layout.vocab()];
    inputs.extend(corpus_files(&layout));
    write_manifest(&layout, cfg, "eval", &inputs, &outputs)?;
    Ok(report)
}

/// The BM25 baseline over the same tasks as [`cmd_eval`].
pub fn cmd_baseline(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out);
    let bundle = read_corpus(&layout)?;
    let report = eval_suite(cfg, &bundle)?.evaluate_bm25()?.with_identity("BM25", 0);
    let outputs = write_report(&layout, &report)?;
    write_manifest(&layout, cfg, "baseline", &corpus_files(&layout), &outputs)?;
    Ok(report)
}

/// Top-k products for an ad-hoc query against `index.bin`.
pub fn cmd_retrieve(cfg: &RunConfig, query: &str, k: usize, category: Option<&str>) -> Result<Vec<(String, f64)>> {
    let layout = Layout::new(&cfg.out);
    let index = EmbeddingIndex::load(&layout.index())?;
    let (_, params, vocab) = read_model(&layout)?;
    let hits = index.retrieve_topk(&embed_query(&params, &vocab, query)?.0, k, category)?;
    write_manifest(&layout, cfg, "retrieve", &[layout.index(), layout.checkpoint(), layout.vocab()], &[])?;
    Ok(hits)
}

/// Curves and statistics tables under `report/`.
pub fn cmd_report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let layout = Layout::new(&cfg.out);
    let mut inputs = vec![layout.loss_curve(), layout.dataset_stats()];
    let eval_curve = if layout.eval_curve().exists() {
        inputs.push(layout.eval_curve());
        report::read_eval_curve(&layout.eval_curve())?
    } else {
        Vec::new()
    };
    let loss = report::read_loss_curve(&layout.loss_curve())?;
    let stats: DatasetStats = serde_json::from_reader(util::open_existing(&layout.dataset_stats())?)?;
    let corpus = if layout.corpus_dir().join("products.jsonl").exists() {
        inputs.extend(corpus_files(&layout));
        Some(corpus_stats(&read_corpus(&layout)?))
    } else {
        None
    };

    let dir = layout.report_dir();
    std::fs::create_dir_all(&dir)?;
    let mut outputs = Vec::new();
    let path = dir.join("loss.svg");
    report::plot_loss(&path, &loss)?;
    outputs.push(path);
    if !eval_curve.is_empty() {
        let path = dir.join("metrics.svg");
        report::plot_metrics(&path, &cfg.model_name(), cfg.eval.k, &eval_curve)?;
        outputs.push(path);
        let path = dir.join("metrics.csv");
        report::write_eval_curve(&path, &eval_curve)?;
        outputs.push(path);
    }
    let path = dir.join("dataset_stats.txt");
    std::fs::write(&path, report::dataset_table(&[(cfg.model_name(), cfg.n_random_same_category, cfg.n_bm25, stats)]))?;
    outputs.push(path);
    if let Some(c) = corpus {
        let path = dir.join("corpus_stats.txt");
        std::fs::write(&path, format!("{c}\n"))?;
        outputs.push(path);
    }
    write_manifest(&layout, cfg, "report", &inputs, &outputs)?;
    Ok(outputs)
}

/// Output of [`cmd_run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub corpus: CorpusStats,
    pub dataset: DatasetStats,
    pub train: TrainSummary,
    pub encoder: EvalReport,
    pub baseline: EvalReport,
}

/// Every stage in order: corpus, dataset, training, index, evaluation,
/// baseline and report.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let corpus = cmd_gen_corpus(cfg)?;
    let dataset = cmd_build_dataset(cfg)?;
    let train = cmd_train(cfg)?;
    cmd_index(cfg)?;
    let encoder = cmd_eval(cfg)?;
    let baseline = cmd_baseline(cfg)?;
    cmd_report(cfg)?;
    Ok(RunSummary { corpus, dataset, train, encoder, baseline })
}
