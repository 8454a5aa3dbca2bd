//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed:
//!
//! ```text
//! cargo test --release --test acceptance
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use chrono::NaiveDate;
use intent_collections::bm25::Bm25Index;
use intent_collections::cli::pipeline::{load_or_generate, run_experiment};
use intent_collections::cli::RunConfig;
use intent_collections::corpus::{Collection, CorpusBundle, Product, Section};
use intent_collections::encoder::{finite_diff_check, triplet_loss, EncoderParams};
use intent_collections::eval::{
    build_eval_tasks, compute_online_metrics, precision_at_k, recall_at_k, relative_score, EvalTask, InteractionLog,
};
use intent_collections::retrieval::EmbeddingIndex;
use intent_collections::text::Vocabulary;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const RATIO_PRESETS: [(&str, f64); 4] = [("hard0", 0.0), ("hard15", 0.15), ("hard40", 0.40), ("hard55", 0.55)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::from_tokens(words.iter().map(String::as_str));
    let mut r = rng(101);
    let text = |r: &mut ChaCha8Rng| {
        let n = r.gen_range(1..8);
        (0..n).map(|_| words.choose(r).unwrap().as_str()).collect::<Vec<_>>().join(" ")
    };
    let (mut active, mut skipped, mut worst, mut kinks) = (0usize, 0usize, 0.0f64, 0usize);
    while active < 1000 {
        let dim = if active % 2 == 0 { 4 } else { 64 };
        let table: Vec<f64> = (0..vocab.len() * dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let params = EncoderParams::from_table(vocab.len(), dim, 0, table).unwrap();
        let texts = [text(&mut r), text(&mut r), text(&mut r)];
        let check = finite_diff_check(&params, [&texts[0], &texts[1], &texts[2]], &vocab, 1.0, 1e-5).unwrap();
        if check.n_checked == 0 || check.at_kink {
            skipped += 1;
            continue;
        }
        // inactive triplets report zero everywhere; only active ones count
        let q = params.embed_ids(&ids(&texts[0], &vocab)).unwrap();
        let p = params.embed_ids(&ids(&texts[1], &vocab)).unwrap();
        let n = params.embed_ids(&ids(&texts[2], &vocab)).unwrap();
        if triplet_loss(&q.0, &p.0, &n.0, 1.0).unwrap() == 0.0 {
            skipped += 1;
            continue;
        }
        worst = worst.max(check.max_rel_error);
        kinks += check.n_kink;
        active += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 30.0,
        format!("1000 active triplets (d 4/64), max rel error {worst:.2e}, {kinks} kink coords skipped, {skipped} inactive redrawn, {secs:.1}s"),
    )
}

fn ids(text: &str, vocab: &Vocabulary) -> Vec<u32> {
    intent_collections::text::tokenize(text, vocab).ids
}

// ---------------------------------------------------------------- 2

fn oracle_bm25(docs: &[(String, Vec<String>)], query: &[String], doc: usize, k1: f64, b: f64) -> f64 {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.1.len()).sum::<usize>() as f64 / n;
    let mut total = 0.0;
    for t in query {
        let df = docs.iter().filter(|d| d.1.contains(t)).count() as f64;
        let tf = docs[doc].1.iter().filter(|w| *w == t).count() as f64;
        if tf == 0.0 {
            continue;
        }
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let len = docs[doc].1.len() as f64;
        total += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
    }
    total
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(202);
    let vocab: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    let cats = ["a", "b", "c"];
    let mut failures = Vec::new();
    let mut max_score_err = 0.0f64;
    for inst in 0..200 {
        let n = r.gen_range(1..=50);
        let ids: Vec<String> = (0..n).map(|i| format!("d{i:02}")).collect();
        let cat_of: Vec<&str> = (0..n).map(|_| *cats.choose(&mut r).unwrap()).collect();

        // BM25
        let docs: Vec<(String, Vec<String>)> = ids
            .iter()
            .map(|id| (id.clone(), (0..r.gen_range(1..10)).map(|_| vocab.choose(&mut r).unwrap().clone()).collect()))
            .collect();
        let index = Bm25Index::build(
            docs.iter().zip(&cat_of).map(|((id, words), c)| (id.clone(), words.join(" "), c.to_string())),
            1.2,
            0.75,
        )
        .unwrap();
        let query: Vec<String> = (0..r.gen_range(1..5)).map(|_| vocab.choose(&mut r).unwrap().clone()).collect();
        let mut expected: Vec<(String, f64)> = Vec::new();
        for (i, (id, _)) in docs.iter().enumerate() {
            let want = oracle_bm25(&docs, &query, i, 1.2, 0.75);
            let got = index.score(&query, id).unwrap();
            max_score_err = max_score_err.max((want - got).abs());
            if (want - got).abs() > 1e-9 {
                failures.push(format!("bm25_score inst {inst} doc {id}: {got} vs {want}"));
            }
            if want > 0.0 {
                expected.push((id.clone(), want));
            }
        }
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let k = r.gen_range(1..=n);
        expected.truncate(k);
        let got = index.search_terms(&query, k);
        let same = got.len() == expected.len()
            && got.iter().zip(&expected).all(|(g, e)| g.0 == e.0 && (g.1 - e.1).abs() <= 1e-9);
        if !same {
            failures.push(format!("bm25 ranking inst {inst}"));
        }

        // cosine top-k; every fifth product repeats an earlier vector to force ties
        let dim = 6;
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            if i % 5 == 4 {
                let j = r.gen_range(0..i);
                vectors.push(vectors[j].clone());
            } else {
                vectors.push((0..dim).map(|_| r.gen_range(-1.0..1.0)).collect());
            }
        }
        let index = EmbeddingIndex::from_vectors(
            ids.iter().zip(&cat_of).zip(&vectors).map(|((id, c), v)| (id.clone(), c.to_string(), v.clone())),
            "oracle",
        )
        .unwrap();
        let q: Vec<f64> = (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect();
        let filter = if r.gen_bool(0.3) { Some(*cats.choose(&mut r).unwrap()) } else { None };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut brute: Vec<(String, f64)> = (0..n)
            .filter(|&i| filter.is_none_or(|c| cat_of[i] == c))
            .map(|i| {
                let dot: f64 = q.iter().zip(&vectors[i]).map(|(a, b)| a * b).sum();
                (ids[i].clone(), dot / (norm(&q) * norm(&vectors[i])))
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        brute.truncate(k);
        let got = index.retrieve_topk(&q, k, filter).unwrap();
        let same = got.len() == brute.len()
            && got.iter().zip(&brute).all(|(g, e)| g.0 == e.0 && (g.1 - e.1).abs() <= 1e-9);
        if !same {
            failures.push(format!("retrieve_topk inst {inst}"));
        }

        // recall and precision over a random ranked list (duplicates allowed)
        let retrieved: Vec<String> = (0..r.gen_range(0..=k)).map(|_| ids.choose(&mut r).unwrap().clone()).collect();
        let n_gt = r.gen_range(1..=n);
        let gt: BTreeSet<String> = ids.choose_multiple(&mut r, n_gt).cloned().collect();
        let c_gt = cats.choose(&mut r).unwrap().to_string();
        let task = EvalTask { query_text: "q".into(), p_gt: gt.clone(), c_gt: Some(c_gt.clone()), collection_id: "c".into() };
        let mut distinct_hits: Vec<&String> = Vec::new();
        for id in &retrieved {
            if gt.contains(id) && !distinct_hits.contains(&id) {
                distinct_hits.push(id);
            }
        }
        let want_recall = distinct_hits.len() as f64 / gt.len() as f64;
        let in_cat = retrieved
            .iter()
            .filter(|id| cat_of[ids.iter().position(|x| x == *id).unwrap()] == c_gt)
            .count();
        let want_precision = if retrieved.is_empty() { 0.0 } else { in_cat as f64 / retrieved.len() as f64 };
        let category_of = |id: &str| ids.iter().position(|x| x == id).map(|i| cat_of[i]);
        if recall_at_k(&retrieved, &task).unwrap() != want_recall {
            failures.push(format!("recall inst {inst}"));
        }
        if precision_at_k(&retrieved, category_of, &task).unwrap() != want_precision {
            failures.push(format!("precision inst {inst}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 10.0,
        format!(
            "200 instances, {} mismatches{}, max bm25 score error {max_score_err:.1e}, {secs:.2}s",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------- 3, 4, 5

#[derive(Clone, Copy)]
struct RunResult {
    recall: f64,
    precision: f64,
    bm25_recall: f64,
    secs: f64,
}

fn experiment(preset: &str, seed: u64) -> RunResult {
    let start = Instant::now();
    let cfg = RunConfig::from_preset(preset, seed).unwrap();
    let bundle = load_or_generate(&cfg).unwrap();
    let exp = run_experiment(&cfg, &bundle, false).unwrap();
    let result = RunResult {
        recall: exp.encoder_report.avg_recall,
        precision: exp.encoder_report.avg_precision.unwrap_or(0.0),
        bm25_recall: exp.bm25_report.avg_recall,
        secs: start.elapsed().as_secs_f64(),
    };
    println!(
        "    {preset:<7} seed {seed}: recall {:.4} precision {:.4} | bm25 recall {:.4} | {:.1}s",
        result.recall, result.precision, result.bm25_recall, result.secs
    );
    result
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        for &o in &order[i..=j] {
            out[o] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    out
}

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean(rx.iter().copied()), mean(ry.iter().copied()));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn findings(grid: &BTreeMap<(String, u64), RunResult>) -> [Outcome; 3] {
    let over = |preset: &str, f: fn(&RunResult) -> f64| mean(SEEDS.iter().map(|s| f(&grid[&(preset.to_string(), *s)])));

    let enc = over("hard0", |r| r.recall);
    let bm25 = over("hard0", |r| r.bm25_recall);
    let slowest = grid.values().map(|r| r.secs).fold(0.0, f64::max);
    let c3 = outcome(
        enc >= 2.0 * bm25 && slowest < 300.0,
        format!("PR_hard0 recall {enc:.4} vs BM25 {bm25:.4} (ratio {:.2}, need >= 2); slowest full pipeline {slowest:.1}s", enc / bm25),
    );

    let hard = over("hard0", |r| r.recall);
    let easy = over("easy0", |r| r.recall);
    let c4 = outcome(hard >= easy, format!("hard0 recall {hard:.4} vs easy0 {easy:.4} over {} seeds", SEEDS.len()));

    let ratios: Vec<f64> = RATIO_PRESETS.iter().map(|p| p.1).collect();
    let precision: Vec<f64> = RATIO_PRESETS.iter().map(|p| over(p.0, |r| r.precision)).collect();
    let recall: Vec<f64> = RATIO_PRESETS.iter().map(|p| over(p.0, |r| r.recall)).collect();
    let rho = spearman(&ratios, &precision);
    let monotone = precision.windows(2).all(|w| w[0] <= w[1]);
    let c5 = outcome(
        rho >= 0.8 && recall[3] <= recall[1],
        format!(
            "precision {:?} (rho {rho:.2}, monotone {monotone}); recall@0.55 {:.4} vs recall@0.15 {:.4}",
            precision.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>(),
            recall[3],
            recall[1]
        ),
    );
    [c3, c4, c5]
}

// ---------------------------------------------------------------- 6

fn loss_laws() -> Outcome {
    let mut r = rng(606);
    let mut failures = Vec::new();
    let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    for i in 0..2000 {
        let dim = r.gen_range(1..6);
        // small integers keep translated differences exact
        let v = |r: &mut ChaCha8Rng| (0..dim).map(|_| r.gen_range(-20..=20) as f64).collect::<Vec<f64>>();
        let (q, p, n) = (v(&mut r), v(&mut r), v(&mut r));
        let margin = r.gen_range(0..4) as f64 * 0.5;
        let loss = triplet_loss(&q, &p, &n, margin).unwrap();
        if loss.is_nan() || loss < 0.0 {
            failures.push(format!("negative loss at {i}"));
        }
        let hinge = norm(&q, &p) - norm(&q, &n) + margin;
        if (loss == 0.0) != (hinge <= 0.0) || (hinge > 0.0 && loss != hinge) {
            failures.push(format!("zero-loss criterion at {i}"));
        }
        let t = v(&mut r);
        let shift = |x: &[f64]| x.iter().zip(&t).map(|(a, b)| a + b).collect::<Vec<f64>>();
        if triplet_loss(&shift(&q), &shift(&p), &shift(&n), margin).unwrap() != loss {
            failures.push(format!("translation at {i}"));
        }
    }
    let examples = [
        (triplet_loss(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap(), 0.0),
        (triplet_loss(&[0.0, 0.0], &[3.0, 4.0], &[6.0, 8.0], 1.0).unwrap(), 0.0),
        (triplet_loss(&[0.0, 0.0], &[6.0, 8.0], &[3.0, 4.0], 1.0).unwrap(), 6.0),
    ];
    for (k, (got, want)) in examples.iter().enumerate() {
        if got != want {
            failures.push(format!("example {k}: {got} != {want}"));
        }
    }
    outcome(failures.is_empty(), format!("2000 random triplets + 3 analytic examples, {} failures {:?}", failures.len(), failures.first()))
}

// ---------------------------------------------------------------- 7

fn online_metrics() -> Outcome {
    let mut r = rng(707);
    let mut failures = 0;
    for i in 0..50 {
        let views = r.gen_range(1..100_000u64);
        let clicks = r.gen_range(0..=views);
        let purchases = r.gen_range(0..=clicks);
        let n_products = r.gen_range(1..300u64);
        let bought = r.gen_range(0..=purchases.min(n_products)) as usize;
        let log = InteractionLog {
            collection_id: format!("c{i}"),
            views,
            clicks,
            purchases,
            purchased_product_ids: (0..bought).map(|j| format!("p{j}")).collect(),
            n_products,
        };
        let m = compute_online_metrics(&log).unwrap();
        let hand = (clicks as f64 / views as f64, purchases as f64 / views as f64, bought as f64 / n_products as f64);
        if (m.ctr, m.cvr, m.order_diversity) != hand {
            failures += 1;
        }
        let xs: Vec<f64> = (0..r.gen_range(1..10)).map(|_| r.gen_range(0.001..1.0)).collect();
        if relative_score(&xs, &xs).unwrap() != 1.0 {
            failures += 1;
        }
    }
    let ratio = relative_score(&[0.058], &[0.05]).unwrap();
    outcome(failures == 0 && ratio == 1.16, format!("50 logs, {failures} mismatches; 0.058/0.05 = {ratio}"))
}

// ---------------------------------------------------------------- 8

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_intentcol"))
            .args(["run", "--preset", "hard15", "--seed", "7", "--out"])
            .arg(&out)
            .env("RUST_LOG", "warn")
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("run exited with {status}"));
        }
        trees.push(files_under(&out));
    }
    let (a, b) = (&trees[0], &trees[1]);
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let required = ["dataset.jsonl", "checkpoint.bin", "report_PR_hard15.csv", "report_BM25.csv"];
    let missing: Vec<&str> = required.iter().copied().filter(|f| !a.contains_key(Path::new(f))).collect();
    outcome(
        differing.is_empty() && missing.is_empty(),
        format!("{} artifacts compared, differing {differing:?}, missing {missing:?}", a.len()),
    )
}

// ---------------------------------------------------------------- 9

fn product(id: String, review_count: u64) -> Product {
    Product {
        product_id: id.clone(),
        title: format!("item {id}"),
        category_path: vec!["goods".into(), "mugs".into()],
        price: 100,
        brand: String::new(),
        tags: vec![],
        extra_attrs: vec![],
        review_count,
        popularity: 0.0,
    }
}

fn protocol_fidelity() -> Outcome {
    let mut r = rng(909);
    let mut failures = Vec::new();
    for trial in 0..30 {
        let mut products = Vec::new();
        let mut collections = Vec::new();
        let mut expected: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
        for c in 0..r.gen_range(1..6) {
            let mut sections = Vec::new();
            for s in 0..r.gen_range(1..4) {
                // eval counts cluster around the threshold
                let (n_eval, n_cold) = (r.gen_range(2..9), r.gen_range(0..4));
                let mut ids = Vec::new();
                for k in 0..n_eval + n_cold {
                    let id = format!("t{trial}c{c}s{s}p{k}");
                    products.push(product(id.clone(), if k < n_eval { r.gen_range(1..50) } else { 0 }));
                    ids.push(id);
                }
                let warm: BTreeSet<String> = ids[..n_eval].iter().cloned().collect();
                ids.shuffle(&mut r);
                let name = format!("section {s}");
                if n_eval >= 5 {
                    expected.insert((format!("C{c}"), name.clone()), warm);
                }
                sections.push(Section { name, product_ids: ids });
            }
            collections.push(Collection {
                collection_id: format!("C{c}"),
                title: "title".into(),
                start_date: NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(),
                sections,
                augmented_category: None,
            });
        }
        let n_warm = products.iter().filter(|p| p.review_count >= 1).count();
        let bundle = CorpusBundle::new(products, collections, None).unwrap();
        let (eval_products, tasks) = build_eval_tasks(&bundle, 1, 5).unwrap();
        if eval_products.len() != n_warm || eval_products.iter().any(|p| p.review_count < 1) {
            failures.push(format!("trial {trial}: eval products"));
        }
        let got: BTreeMap<(String, String), BTreeSet<String>> = tasks
            .iter()
            .map(|t| {
                let section = t.query_text.split(" [SEP] ").nth(1).unwrap().to_string();
                ((t.collection_id.clone(), section), t.p_gt.clone())
            })
            .collect();
        if got != expected || got.len() != tasks.len() {
            failures.push(format!("trial {trial}: tasks"));
        }
    }
    outcome(failures.is_empty(), format!("30 constructed corpora, {} failures {:?}", failures.len(), failures.first()))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    results.push((1, "gradient correctness", gradient_correctness()));
    results.push((2, "oracle equivalence", oracle_equivalence()));

    let mut grid = BTreeMap::new();
    for preset in ["easy0", "hard0", "hard15", "hard40", "hard55"] {
        for seed in SEEDS {
            grid.insert((preset.to_string(), seed), experiment(preset, seed));
        }
    }
    let [c3, c4, c5] = findings(&grid);
    results.push((3, "semantic-gap finding", c3));
    results.push((4, "hard-negative finding", c4));
    results.push((5, "augmentation trade-off", c5));
    results.push((6, "loss laws", loss_laws()));
    results.push((7, "online metrics", online_metrics()));
    results.push((8, "determinism", determinism()));
    results.push((9, "protocol fidelity", protocol_fidelity()));

    println!();
    for (id, name, o) in &results {
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if results.iter().all(|(_, _, o)| o.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
