//! Okapi BM25 over an inverted index.
//!
//! Serves both as the lexical retrieval baseline and as the hard-negative
//! sampler for triplet construction. Documents and queries are tokenized by
//! whitespace, lowercased, with surrounding punctuation trimmed and the
//! `[SEP]` marker dropped.
//!
//! On-disk format (`.jsonl`): a header line
//! `{"k1":..,"b":..,"n_docs":..,"avg_doc_len":..}`, then one line per
//! document `{"doc":id,"len":n,"category":c}` in id order, then one line per
//! term `{"term":t,"postings":[[id,tf],..]}` in term order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus;
use crate::error::{Error, Result};
use crate::text::SEP;
use crate::util;

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Extra depth searched past `n + |positives|` when mining hard negatives.
pub const HARD_NEGATIVE_BUFFER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    doc_category: Vec<String>,
    avg_doc_len: f64,
    k1: f64,
    b: f64,
    lookup: HashMap<String, u32>,
}

/// Whitespace tokenization used on both the document and the query side.
pub fn space_tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|w| *w != SEP)
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

impl Bm25Index {
    /// Builds an index over `(doc_id, text, category)` triples.
    pub fn build<I, S1, S2, S3>(docs: I, k1: f64, b: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (S1, S2, S3)>,
        S1: Into<String>,
        S2: AsRef<str>,
        S3: Into<String>,
    {
        if !(k1 > 0.0) {
            return Err(Error::config("k1", "must be positive"));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::config("b", "must lie in [0, 1]"));
        }
        let mut index = Bm25Index {
            postings: BTreeMap::new(),
            doc_ids: Vec::new(),
            doc_len: Vec::new(),
            doc_category: Vec::new(),
            avg_doc_len: 0.0,
            k1,
            b,
            lookup: HashMap::new(),
        };
        for (id, text, category) in docs {
            let id: String = id.into();
            let doc = index.doc_ids.len() as u32;
            if index.lookup.insert(id.clone(), doc).is_some() {
                return Err(Error::DuplicateId(id));
            }
            let terms = space_tokenize(text.as_ref());
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in &terms {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                index.postings.entry(term).or_default().push(Posting { doc, tf: count });
            }
            index.doc_ids.push(id);
            index.doc_len.push(terms.len() as u32);
            index.doc_category.push(category.into());
        }
        if index.doc_ids.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let total: u64 = index.doc_len.iter().map(|&l| l as u64).sum();
        index.avg_doc_len = total as f64 / index.doc_ids.len() as f64;
        Ok(index)
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.lookup.get(doc_id).map(|&i| i as usize)
    }

    pub fn category(&self, doc_id: &str) -> Option<&str> {
        self.doc_index(doc_id).map(|i| self.doc_category[i].as_str())
    }

    /// Doc ids grouped by category, each list in index order.
    pub fn docs_by_category(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (id, cat) in self.doc_ids.iter().zip(&self.doc_category) {
            groups.entry(cat.as_str()).or_default().push(id.as_str());
        }
        groups
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: f64, len: f64) -> f64 {
        idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * len / self.avg_doc_len))
    }

    /// BM25 score of one document; repeated query terms count repeatedly.
    pub fn score(&self, query_terms: &[String], doc_id: &str) -> Result<f64> {
        let doc = self
            .doc_index(doc_id)
            .ok_or_else(|| Error::Lookup(doc_id.to_string()))? as u32;
        let len = self.doc_len[doc as usize] as f64;
        let mut total = 0.0;
        for term in query_terms {
            let Some(list) = self.postings.get(term) else { continue };
            if let Ok(pos) = list.binary_search_by_key(&doc, |p| p.doc) {
                total += self.term_weight(self.idf(term), list[pos].tf as f64, len);
            }
        }
        Ok(total)
    }

    /// Top-`k` documents by score (descending, ties by doc id ascending).
    /// Zero-score documents are never returned.
    pub fn search(
        &self,
        query: &str,
        k: usize,
        stopwords: &HashSet<String>,
        drop_date: bool,
    ) -> Vec<(String, f64)> {
        let terms = query_terms(query, stopwords, drop_date);
        self.search_terms(&terms, k)
    }

    pub fn search_terms(&self, terms: &[String], k: usize) -> Vec<(String, f64)> {
        let mut scores = vec![0.0f64; self.n_docs()];
        for term in terms {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for p in list {
                scores[p.doc as usize] +=
                    self.term_weight(idf, p.tf as f64, self.doc_len[p.doc as usize] as f64);
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|(_, s)| *s > 0.0)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0].cmp(&self.doc_ids[b.0]))
        });
        ranked.truncate(k);
        ranked
            .into_iter()
            .map(|(i, s)| (self.doc_ids[i].clone(), s))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let header = serde_json::json!({
            "k1": self.k1, "b": self.b, "n_docs": self.n_docs(), "avg_doc_len": self.avg_doc_len,
        });
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for (i, id) in self.doc_ids.iter().enumerate() {
            let line = serde_json::json!({"doc": id, "len": self.doc_len[i], "category": self.doc_category[i]});
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        for (term, list) in &self.postings {
            let pairs: Vec<(u32, u32)> = list.iter().map(|p| (p.doc, p.tf)).collect();
            serde_json::to_writer(&mut out, &serde_json::json!({"term": term, "postings": pairs}))?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            k1: f64,
            b: f64,
            n_docs: usize,
            avg_doc_len: f64,
        }
        #[derive(Deserialize)]
        struct DocLine {
            doc: String,
            len: u32,
            category: String,
        }
        #[derive(Deserialize)]
        struct TermLine {
            term: String,
            postings: Vec<(u32, u32)>,
        }
        let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.to_string(),
        };
        let reader = BufReader::new(util::open_existing(path)?);
        let mut lines = reader.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::EmptyCorpus)?;
        let header: Header = serde_json::from_str(&first?).map_err(|e| parse_err(1, e))?;
        let mut index = Bm25Index {
            postings: BTreeMap::new(),
            doc_ids: Vec::with_capacity(header.n_docs),
            doc_len: Vec::with_capacity(header.n_docs),
            doc_category: Vec::with_capacity(header.n_docs),
            avg_doc_len: header.avg_doc_len,
            k1: header.k1,
            b: header.b,
            lookup: HashMap::with_capacity(header.n_docs),
        };
        for (i, line) in lines {
            let line = line?;
            if index.doc_ids.len() < header.n_docs {
                let d: DocLine = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
                index.lookup.insert(d.doc.clone(), index.doc_ids.len() as u32);
                index.doc_ids.push(d.doc);
                index.doc_len.push(d.len);
                index.doc_category.push(d.category);
            } else {
                let t: TermLine = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
                index.postings.insert(
                    t.term,
                    t.postings.into_iter().map(|(doc, tf)| Posting { doc, tf }).collect(),
                );
            }
        }
        Ok(index)
    }
}

/// Free-function form of [`Bm25Index::build`].
pub fn build_bm25_index<I, S1, S2, S3>(docs: I, k1: f64, b: f64) -> Result<Bm25Index>
where
    I: IntoIterator<Item = (S1, S2, S3)>,
    S1: Into<String>,
    S2: AsRef<str>,
    S3: Into<String>,
{
    Bm25Index::build(docs, k1, b)
}

/// Query preprocessing: optional removal of a trailing "Month Day" segment,
/// whitespace tokenization, stopword removal.
pub fn query_terms(query: &str, stopwords: &HashSet<String>, drop_date: bool) -> Vec<String> {
    let text = if drop_date { strip_trailing_date(query) } else { query };
    space_tokenize(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

fn strip_trailing_date(query: &str) -> &str {
    match query.rfind(SEP) {
        Some(pos) if corpus::is_month_day(query[pos + SEP.len()..].trim()) => &query[..pos],
        _ if corpus::is_month_day(query.trim()) => "",
        _ => query,
    }
}

/// Reads a stopword file: one term per line, blank lines ignored.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let body = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Ok(body
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

pub fn default_stopwords() -> HashSet<String> {
    corpus::TITLE_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// BM25-mined negatives: the best-scoring non-positive documents for
/// `query`, topped up with seeded uniform draws when the ranked pool runs
/// short. Never returns a positive or a duplicate.
pub fn sample_hard_negatives(
    index: &Bm25Index,
    query: &str,
    positives: &BTreeSet<&str>,
    n: usize,
    seed: u64,
) -> Vec<String> {
    if n == 0 {
        return Vec::new();
    }
    let k = n + positives.len() + HARD_NEGATIVE_BUFFER;
    let terms = query_terms(query, &HashSet::new(), false);
    let mut out: Vec<String> = index
        .search_terms(&terms, k)
        .into_iter()
        .map(|(id, _)| id)
        .filter(|id| !positives.contains(id.as_str()))
        .take(n)
        .collect();
    if out.len() < n {
        let taken: HashSet<String> = out.iter().cloned().collect();
        let mut pool: Vec<&String> = index
            .doc_ids
            .iter()
            .filter(|id| !positives.contains(id.as_str()) && !taken.contains(*id))
            .collect();
        let mut rng = util::rng(seed);
        pool.shuffle(&mut rng);
        out.extend(pool.into_iter().take(n - out.len()).cloned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_docs() -> Bm25Index {
        Bm25Index::build([("d1", "red skirt", "skirts"), ("d2", "blue pants", "pants")], 1.2, 0.75)
            .unwrap()
    }

    fn terms(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn build_counts_terms_and_lengths() {
        let idx = two_docs();
        assert_eq!(idx.n_terms(), 4);
        assert_eq!(idx.avg_doc_len(), 2.0);
    }

    #[test]
    fn build_rejects_empty_and_duplicates() {
        let empty: Vec<(String, String, String)> = vec![];
        assert!(matches!(Bm25Index::build(empty, 1.2, 0.75), Err(Error::EmptyCorpus)));
        let dup = Bm25Index::build([("a", "x", "c"), ("a", "y", "c")], 1.2, 0.75);
        assert!(matches!(dup, Err(Error::DuplicateId(_))));
    }

    #[test]
    fn single_term_score_matches_hand_value() {
        let idx = two_docs();
        let s = idx.score(&terms(&["red"]), "d1").unwrap();
        assert!((s - 2f64.ln()).abs() < 1e-12, "{s}");
        assert_eq!(idx.score(&terms(&["green"]), "d1").unwrap(), 0.0);
        assert_eq!(idx.score(&terms(&["red", "red"]), "d1").unwrap(), 2.0 * s);
        assert!(matches!(idx.score(&terms(&["red"]), "d9"), Err(Error::Lookup(_))));
    }

    #[test]
    fn search_ranks_exact_match_first_and_breaks_ties_by_id() {
        let idx = Bm25Index::build(
            [("b", "summer skirt", "s"), ("a", "summer skirt", "s"), ("c", "winter coat warm", "c")],
            1.2,
            0.75,
        )
        .unwrap();
        let hits = idx.search("winter coat warm", 3, &HashSet::new(), false);
        assert_eq!(hits[0].0, "c");
        let hits = idx.search("summer skirt", 3, &HashSet::new(), false);
        assert_eq!(hits.iter().map(|h| h.0.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn stopwords_and_date_are_filtered() {
        let stop: HashSet<String> = ["collection".to_string()].into();
        assert_eq!(query_terms("summer collection", &stop, false), terms(&["summer"]));
        assert_eq!(
            query_terms("Cool summer [SEP] pastel skirts [SEP] June 15", &HashSet::new(), true),
            terms(&["cool", "summer", "pastel", "skirts"])
        );
        assert_eq!(
            query_terms("Cool [SEP] skirts [SEP] June 15", &HashSet::new(), false),
            terms(&["cool", "skirts", "june", "15"])
        );
    }

    #[test]
    fn hard_negatives_exclude_positives_and_fill() {
        let idx = two_docs();
        assert!(sample_hard_negatives(&idx, "red", &BTreeSet::new(), 0, 1).is_empty());
        let positives: BTreeSet<&str> = ["d1"].into();
        let out = sample_hard_negatives(&idx, "red skirt", &positives, 1, 3);
        assert_eq!(out, vec!["d2".to_string()]);
    }

    #[test]
    fn save_load_roundtrip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let idx = two_docs();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        idx.save(&p1).unwrap();
        let loaded = Bm25Index::load(&p1).unwrap();
        assert_eq!(loaded, idx);
        two_docs().save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    /// Scores every document by rescanning its raw text.
    fn naive_score(docs: &[(String, String)], query: &[String], doc: usize, k1: f64, b: f64) -> f64 {
        let toks: Vec<Vec<String>> = docs.iter().map(|(_, t)| space_tokenize(t)).collect();
        let n = docs.len() as f64;
        let avg = toks.iter().map(Vec::len).sum::<usize>() as f64 / n;
        let len = toks[doc].len() as f64;
        query
            .iter()
            .map(|q| {
                let tf = toks[doc].iter().filter(|t| *t == q).count() as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                let df = toks.iter().filter(|d| d.contains(q)).count() as f64;
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg))
            })
            .sum()
    }

    proptest! {
        #[test]
        fn matches_full_scan_scorer(
            docs in proptest::collection::vec(proptest::collection::vec(0u8..6, 1..8), 1..12),
            query in proptest::collection::vec(0u8..8, 1..5),
            k1 in 0.5f64..2.0,
            b in 0.0f64..1.0,
        ) {
            let docs: Vec<(String, String)> = docs
                .iter()
                .enumerate()
                .map(|(i, ws)| (format!("d{i:02}"), ws.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" ")))
                .collect();
            let idx = Bm25Index::build(docs.iter().map(|(i, t)| (i.clone(), t.clone(), "c")), k1, b).unwrap();
            let q: Vec<String> = query.iter().map(|w| format!("w{w}")).collect();
            for (i, (id, _)) in docs.iter().enumerate() {
                let fast = idx.score(&q, id).unwrap();
                prop_assert!((fast - naive_score(&docs, &q, i, k1, b)).abs() < 1e-9);
            }
        }

        #[test]
        fn hard_negatives_never_positive(n in 0usize..6, seed in 0u64..100, npos in 0usize..4) {
            let docs: Vec<(String, String, String)> = (0..6)
                .map(|i| (format!("d{i}"), format!("red w{i}"), "c".to_string()))
                .collect();
            let idx = Bm25Index::build(docs, 1.2, 0.75).unwrap();
            let pos_ids: Vec<String> = (0..npos).map(|i| format!("d{i}")).collect();
            let positives: BTreeSet<&str> = pos_ids.iter().map(String::as_str).collect();
            let out = sample_hard_negatives(&idx, "red", &positives, n, seed);
            prop_assert_eq!(out.len(), n.min(6 - npos));
            prop_assert!(out.iter().all(|id| !positives.contains(id.as_str())));
            let unique: HashSet<_> = out.iter().collect();
            prop_assert_eq!(unique.len(), out.len());
        }
    }
}
