use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bm25::Bm25Index;
use crate::corpus::{CorpusBundle, Product};
use crate::encoder::TextEncoder;
use crate::error::{Error, Result};
use crate::retrieval::{embed_query, EmbeddingIndex};
use crate::text::{render_query, Vocabulary};

pub const DEFAULT_K: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTask {
    pub query_text: String,
    pub p_gt: BTreeSet<String>,
    /// Ground-truth leaf category; only category-augmented queries carry one.
    pub c_gt: Option<String>,
    pub collection_id: String,
}

/// Evaluation products are those with at least `min_review_count` reviews.
/// Each (collection, section) query becomes a task when at least `min_gt` of
/// the section's products are evaluation products; those form `p_gt`.
pub fn build_eval_tasks(
    bundle: &CorpusBundle,
    min_review_count: u64,
    min_gt: usize,
) -> Result<(Vec<Product>, Vec<EvalTask>)> {
    if min_gt == 0 {
        return Err(Error::config("min_gt", "must be at least 1"));
    }
    let eval_products: Vec<Product> = bundle
        .products
        .iter()
        .filter(|p| p.review_count >= min_review_count)
        .cloned()
        .collect();
    let eval_ids: HashSet<&str> = eval_products.iter().map(|p| p.product_id.as_str()).collect();
    let mut tasks = Vec::new();
    for c in &bundle.collections {
        for s in &c.sections {
            let p_gt: BTreeSet<String> = s
                .product_ids
                .iter()
                .filter(|id| eval_ids.contains(id.as_str()))
                .cloned()
                .collect();
            if p_gt.len() < min_gt {
                continue;
            }
            tasks.push(EvalTask {
                query_text: render_query(&c.title, &s.name, c.start_date),
                p_gt,
                c_gt: c.augmented_category.clone().filter(|c| !c.is_empty()),
                collection_id: c.collection_id.clone(),
            });
        }
    }
    Ok((eval_products, tasks))
}

/// `|retrieved ∩ p_gt| / |p_gt|`; duplicates in `retrieved` count once.
pub fn recall_at_k(retrieved: &[String], task: &EvalTask) -> Result<f64> {
    if task.p_gt.is_empty() {
        return Err(Error::Contract(format!("task {} has an empty ground-truth set", task.collection_id)));
    }
    let hits: HashSet<&str> = retrieved
        .iter()
        .map(String::as_str)
        .filter(|id| task.p_gt.contains(*id))
        .collect();
    Ok(hits.len() as f64 / task.p_gt.len() as f64)
}

/// Share of retrieved products whose leaf category is the task's `c_gt`.
pub fn precision_at_k<'a>(
    retrieved: &[String],
    category_of: impl Fn(&str) -> Option<&'a str>,
    task: &EvalTask,
) -> Result<f64> {
    let target = task
        .c_gt
        .as_deref()
        .ok_or_else(|| Error::Contract(format!("task {} has no ground-truth category", task.collection_id)))?;
    if retrieved.is_empty() {
        return Ok(0.0);
    }
    let hits = retrieved.iter().filter(|id| category_of(id) == Some(target)).count();
    Ok(hits as f64 / retrieved.len() as f64)
}

/// The category column a task is reported under: its `c_gt`, otherwise the
/// most common leaf among its ground-truth products (ties to the
/// lexicographically smallest).
pub fn task_category<'a>(task: &EvalTask, category_of: impl Fn(&str) -> Option<&'a str>) -> String {
    if let Some(c) = &task.c_gt {
        return c.clone();
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for id in &task.p_gt {
        *counts.entry(category_of(id).unwrap_or("")).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (c, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c.to_string()).unwrap_or_default()
}

/// What answers the queries: a trained encoder over an embedding index, or
/// the lexical baseline.
pub enum EvalMode<'a> {
    Encoder {
        encoder: &'a (dyn TextEncoder + Sync),
        vocab: &'a Vocabulary,
        index: &'a EmbeddingIndex,
    },
    Bm25 {
        index: &'a Bm25Index,
        stopwords: &'a HashSet<String>,
        drop_date: bool,
    },
}

impl EvalMode<'_> {
    fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>> {
        let ranked = match self {
            EvalMode::Encoder { encoder, vocab, index } => {
                let q = embed_query(*encoder, vocab, query)?;
                index.retrieve_topk(&q, k, None)?
            }
            EvalMode::Bm25 { index, stopwords, drop_date } => index.search(query, k, stopwords, *drop_date),
        };
        Ok(ranked.into_iter().map(|(id, _)| id).collect())
    }

    fn category_of(&self, id: &str) -> Option<&str> {
        match self {
            EvalMode::Encoder { index, .. } => index.category(id),
            EvalMode::Bm25 { index, .. } => index.category(id),
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            EvalMode::Encoder { .. } => "encoder",
            EvalMode::Bm25 { .. } => "bm25",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub n_tasks: usize,
    pub recall: f64,
    pub n_precision_tasks: usize,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub step: usize,
    pub k: usize,
    pub rows: Vec<CategoryRow>,
    pub avg_recall: f64,
    pub avg_precision: Option<f64>,
    pub n_tasks: usize,
    /// Collections of tasks with more ground-truth products than `k`; their
    /// recall cannot exceed `k / |p_gt|`.
    pub capped_tasks: Vec<String>,
}

struct TaskResult {
    category: String,
    recall: f64,
    precision: Option<f64>,
}

fn eval_task(mode: &EvalMode<'_>, task: &EvalTask, k: usize) -> Result<TaskResult> {
    let retrieved = mode.retrieve(&task.query_text, k)?;
    let category_of = |id: &str| mode.category_of(id);
    Ok(TaskResult {
        category: task_category(task, category_of),
        recall: recall_at_k(&retrieved, task)?,
        precision: match task.c_gt {
            Some(_) => Some(precision_at_k(&retrieved, category_of, task)?),
            None => None,
        },
    })
}

/// Evaluates every task at cutoff `k` using all available cores.
pub fn run_offline_eval(mode: &EvalMode<'_>, tasks: &[EvalTask], k: usize) -> Result<EvalReport> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    run_offline_eval_with_threads(mode, tasks, k, threads)
}

/// Per-task results are computed in parallel chunks and aggregated in task
/// order, so the report does not depend on `threads`.
pub fn run_offline_eval_with_threads(
    mode: &EvalMode<'_>,
    tasks: &[EvalTask],
    k: usize,
    threads: usize,
) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    if tasks.is_empty() {
        log::warn!("no evaluation tasks; emitting an empty report");
    }
    let chunk = tasks.len().div_ceil(threads.max(1)).max(1);
    let results: Vec<TaskResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|t| eval_task(mode, t, k)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut all = Vec::with_capacity(tasks.len());
        for h in handles {
            all.extend(h.join().expect("evaluation worker panicked")?);
        }
        Ok::<_, Error>(all)
    })?;

    let mut groups: BTreeMap<&str, Vec<&TaskResult>> = BTreeMap::new();
    for r in &results {
        groups.entry(&r.category).or_default().push(r);
    }
    let rows: Vec<CategoryRow> = groups
        .into_iter()
        .map(|(category, rs)| {
            let precisions: Vec<f64> = rs.iter().filter_map(|r| r.precision).collect();
            CategoryRow {
                category: category.to_string(),
                n_tasks: rs.len(),
                recall: mean(rs.iter().map(|r| r.recall)),
                n_precision_tasks: precisions.len(),
                precision: (!precisions.is_empty()).then(|| mean(precisions.iter().copied())),
            }
        })
        .collect();
    let with_precision: Vec<f64> = rows.iter().filter_map(|r| r.precision).collect();
    Ok(EvalReport {
        model: mode.tag().to_string(),
        step: 0,
        k,
        avg_recall: if rows.is_empty() { 0.0 } else { mean(rows.iter().map(|r| r.recall)) },
        avg_precision: (!with_precision.is_empty()).then(|| mean(with_precision.iter().copied())),
        n_tasks: tasks.len(),
        capped_tasks: tasks
            .iter()
            .filter(|t| t.p_gt.len() > k)
            .map(|t| t.collection_id.clone())
            .collect(),
        rows,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 { 0.0 } else { sum / n as f64 }
}

fn fmt_metric(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.5}")).unwrap_or_default()
}

impl EvalReport {
    pub fn with_identity(mut self, model: impl Into<String>, step: usize) -> Self {
        self.model = model.into();
        self.step = step;
        self
    }

    /// One row per category plus a final `Avg.` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,n_tasks,recall,precision\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.5},{}", r.category, r.n_tasks, r.recall, fmt_metric(r.precision));
        }
        let _ = writeln!(out, "Avg.,{},{:.5},{}", self.n_tasks, self.avg_recall, fmt_metric(self.avg_precision));
        out
    }

    /// Categories as columns, metrics as rows.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.category.len()).max().unwrap_or(0).max(8) + 2;
        let _ = write!(out, "{:<24}", format!("{} step {}", self.model, self.step));
        for r in &self.rows {
            let _ = write!(out, "{:>width$}", r.category);
        }
        let _ = writeln!(out, "{:>width$}", "Avg.");
        let _ = write!(out, "{:<24}", format!("Recall@{}", self.k));
        for r in &self.rows {
            let _ = write!(out, "{:>width$.5}", r.recall);
        }
        let _ = writeln!(out, "{:>width$.5}", self.avg_recall);
        if self.avg_precision.is_some() {
            let _ = write!(out, "{:<24}", format!("Precision@{}", self.k));
            for r in &self.rows {
                let _ = write!(out, "{:>width$}", fmt_metric(r.precision));
            }
            let _ = writeln!(out, "{:>width$}", fmt_metric(self.avg_precision));
        }
        if !self.capped_tasks.is_empty() {
            let _ = writeln!(out, "{} task(s) have more ground-truth products than K", self.capped_tasks.len());
        }
        out
    }
}
