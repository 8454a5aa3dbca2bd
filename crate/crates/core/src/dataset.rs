//! Triplet training data.
//!
//! Collections are decomposed into `(query, product)` positive pairs, each
//! pair is expanded with same-category random negatives and BM25-mined hard
//! negatives, and the result is persisted as line-delimited JSON with a
//! provenance header.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::bm25::{sample_hard_negatives, Bm25Index};
use crate::corpus::{Collection, CorpusBundle, Section};
use crate::error::{Error, Result};
use crate::text::{render_product, render_query};
use crate::util;

/// Positive pairs kept per collection before subsampling kicks in.
pub const MAX_PAIRS_PER_COLLECTION: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegSamplingConfig {
    pub n_random_same_category: usize,
    pub n_bm25: usize,
    pub seed: u64,
}

impl NegSamplingConfig {
    /// 25 same-category random negatives.
    pub fn easy(seed: u64) -> Self {
        NegSamplingConfig { n_random_same_category: 25, n_bm25: 0, seed }
    }

    /// 10 same-category random negatives plus 15 BM25 negatives.
    pub fn hard(seed: u64) -> Self {
        NegSamplingConfig { n_random_same_category: 10, n_bm25: 15, seed }
    }

    pub fn per_pair(&self) -> usize {
        self.n_random_same_category + self.n_bm25
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_pair() == 0 {
            return Err(Error::config("negatives", "at least one negative per pair is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSource {
    RandomCategory,
    Bm25,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletExample {
    pub query_text: Arc<str>,
    pub positive_text: Arc<str>,
    pub negative_text: Arc<str>,
    pub negative_source: NegativeSource,
    pub collection_id: Arc<str>,
    pub positive_product_id: Arc<str>,
    pub negative_product_id: Arc<str>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub aug_ratio: f64,
    pub negatives: NegSamplingConfig,
    pub corpus_hash: String,
    pub n_positive_pairs: usize,
    /// Random negatives drawn outside the positive's category because its
    /// category pool was too small.
    pub n_category_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletDataset {
    pub provenance: Provenance,
    pub examples: Vec<TripletExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PositivePair {
    pub query_text: Arc<str>,
    pub collection_id: Arc<str>,
    pub product_id: Arc<str>,
}

/// Splits a random `ratio` of multi-category collections into one
/// collection per leaf category, each with a single section named after the
/// category. Unselected collections pass through first, in order; the
/// augmented ones follow.
pub fn augment_category_wise(bundle: &CorpusBundle, ratio: f64, seed: u64) -> Result<Vec<Collection>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config("aug_ratio", "must lie in [0, 1]"));
    }
    let collections = &bundle.collections;
    let n_selected = (ratio * collections.len() as f64).floor() as usize;
    let mut rng = util::rng(seed);
    let mut selected: Vec<usize> = index::sample(&mut rng, collections.len(), n_selected).into_vec();
    selected.sort_unstable();
    let selected_set: HashSet<usize> = selected.iter().copied().collect();

    let mut out: Vec<Collection> = collections
        .iter()
        .enumerate()
        .filter(|(i, _)| !selected_set.contains(i))
        .map(|(_, c)| c.clone())
        .collect();

    for &i in &selected {
        let c = &collections[i];
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut seen = HashSet::new();
        for id in c.sections.iter().flat_map(|s| &s.product_ids) {
            if !seen.insert(id) {
                continue;
            }
            let product = bundle.product(id).ok_or_else(|| Error::Lookup(id.clone()))?;
            groups.entry(product.leaf_category().to_string()).or_default().push(id.clone());
        }
        for (leaf, ids) in groups {
            let name = bundle
                .taxonomy
                .deepest_common_ancestor([leaf.as_str()])
                .unwrap_or_else(|| leaf.clone());
            out.push(Collection {
                collection_id: format!("{}#{}", c.collection_id, leaf),
                title: c.title.clone(),
                start_date: c.start_date,
                sections: vec![Section { name: name.clone(), product_ids: ids }],
                augmented_category: Some(name),
            });
        }
    }
    Ok(out)
}

/// One pair per accessible product in each section, at most
/// [`MAX_PAIRS_PER_COLLECTION`] per collection (seeded subsample, order kept).
pub fn decompose_positive_pairs(
    bundle: &CorpusBundle,
    accessible: Option<&HashSet<String>>,
    seed: u64,
) -> Vec<PositivePair> {
    let mut rng = util::rng(seed);
    let mut pairs = Vec::new();
    for c in &bundle.collections {
        let cid: Arc<str> = Arc::from(c.collection_id.as_str());
        let mut local = Vec::new();
        for s in &c.sections {
            let query: Arc<str> = Arc::from(render_query(&c.title, &s.name, c.start_date));
            for id in &s.product_ids {
                if accessible.is_none_or(|a| a.contains(id)) {
                    local.push(PositivePair {
                        query_text: query.clone(),
                        collection_id: cid.clone(),
                        product_id: Arc::from(id.as_str()),
                    });
                }
            }
        }
        if local.len() > MAX_PAIRS_PER_COLLECTION {
            let mut keep = index::sample(&mut rng, local.len(), MAX_PAIRS_PER_COLLECTION).into_vec();
            keep.sort_unstable();
            local = keep.into_iter().map(|i| local[i].clone()).collect();
        }
        pairs.extend(local);
    }
    pairs
}

/// Attaches negatives to every positive pair. Negatives come from the
/// products indexed in `bm25`, never from the pair's own collection.
pub fn build_triplets(
    pairs: &[PositivePair],
    bundle: &CorpusBundle,
    bm25: &Bm25Index,
    cfg: &NegSamplingConfig,
) -> Result<TripletDataset> {
    cfg.validate()?;
    let mut rng = util::rng(cfg.seed);
    let by_category = bm25.docs_by_category();
    let all_docs: Vec<&str> = bm25.doc_ids().iter().map(String::as_str).collect();

    let mut texts: HashMap<&str, Arc<str>> = HashMap::new();
    let mut text_of = |id: &str| -> Result<Arc<str>> {
        if let Some(t) = texts.get(id) {
            return Ok(t.clone());
        }
        let p = bundle.product(id).ok_or_else(|| Error::Lookup(id.to_string()))?;
        let t: Arc<str> = Arc::from(render_product(p));
        texts.insert(&p.product_id, t.clone());
        Ok(t)
    };
    let mut ids: HashMap<String, Arc<str>> = HashMap::new();
    let mut intern = |id: &str| -> Arc<str> {
        ids.entry(id.to_string()).or_insert_with(|| Arc::from(id)).clone()
    };

    let mut members_cache: HashMap<Arc<str>, BTreeSet<&str>> = HashMap::new();
    let mut hard_cache: HashMap<(Arc<str>, Arc<str>), Vec<String>> = HashMap::new();
    let mut examples = Vec::with_capacity(pairs.len() * cfg.per_pair());
    let mut fallbacks = 0usize;

    for pair in pairs {
        let members = members_cache
            .entry(pair.collection_id.clone())
            .or_insert_with(|| {
                bundle
                    .collection(&pair.collection_id)
                    .map(Collection::member_ids)
                    .unwrap_or_default()
            })
            .clone();
        if members.is_empty() {
            return Err(Error::Lookup(pair.collection_id.to_string()));
        }
        let positive = bundle
            .product(&pair.product_id)
            .ok_or_else(|| Error::Lookup(pair.product_id.to_string()))?;
        let positive_text = text_of(&positive.product_id)?;

        // same-category random negatives, with any-category fallback
        let mut chosen: Vec<&str> = Vec::with_capacity(cfg.n_random_same_category);
        if cfg.n_random_same_category > 0 {
            let pool: Vec<&str> = by_category
                .get(positive.leaf_category())
                .map(|ids| ids.iter().copied().filter(|id| !members.contains(id)).collect())
                .unwrap_or_default();
            if pool.len() >= cfg.n_random_same_category {
                chosen.extend(pool.choose_multiple(&mut rng, cfg.n_random_same_category).copied());
            } else {
                chosen.extend(pool.iter().copied());
                let taken: HashSet<&str> = chosen.iter().copied().collect();
                let rest: Vec<&str> = all_docs
                    .iter()
                    .copied()
                    .filter(|id| !members.contains(id) && !taken.contains(id))
                    .collect();
                let need = cfg.n_random_same_category - chosen.len();
                let extra: Vec<&str> = rest.choose_multiple(&mut rng, need).copied().collect();
                fallbacks += extra.len();
                chosen.extend(extra);
            }
        }
        for neg in chosen {
            examples.push(TripletExample {
                query_text: pair.query_text.clone(),
                positive_text: positive_text.clone(),
                negative_text: text_of(neg)?,
                negative_source: NegativeSource::RandomCategory,
                collection_id: pair.collection_id.clone(),
                positive_product_id: pair.product_id.clone(),
                negative_product_id: intern(neg),
            });
        }

        if cfg.n_bm25 > 0 {
            let key = (pair.query_text.clone(), pair.collection_id.clone());
            let hard = hard_cache.entry(key).or_insert_with(|| {
                let seed = util::mix_seed(cfg.seed, util::hash64(pair.query_text.as_bytes()));
                sample_hard_negatives(bm25, &pair.query_text, &members, cfg.n_bm25, seed)
            });
            for neg in hard.iter() {
                examples.push(TripletExample {
                    query_text: pair.query_text.clone(),
                    positive_text: positive_text.clone(),
                    negative_text: text_of(neg)?,
                    negative_source: NegativeSource::Bm25,
                    collection_id: pair.collection_id.clone(),
                    positive_product_id: pair.product_id.clone(),
                    negative_product_id: intern(neg),
                });
            }
        }
    }

    Ok(TripletDataset {
        provenance: Provenance {
            aug_ratio: 0.0,
            negatives: *cfg,
            corpus_hash: bundle.content_hash()?,
            n_positive_pairs: pairs.len(),
            n_category_fallbacks: fallbacks,
        },
        examples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_positive_pairs: usize,
    pub n_distinct_negative_products: usize,
    pub n_triplets: usize,
    pub aug_ratio: f64,
}

pub fn dataset_stats(ds: &TripletDataset) -> DatasetStats {
    let pairs: HashSet<(&str, &str, &str)> = ds
        .examples
        .iter()
        .map(|e| (&*e.collection_id, &*e.query_text, &*e.positive_product_id))
        .collect();
    let negatives: HashSet<&str> = ds.examples.iter().map(|e| &*e.negative_product_id).collect();
    DatasetStats {
        n_positive_pairs: pairs.len(),
        n_distinct_negative_products: negatives.len(),
        n_triplets: ds.examples.len(),
        aug_ratio: ds.provenance.aug_ratio,
    }
}

impl TripletDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Provenance header line, then one example per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, &serde_json::json!({ "provenance": self.provenance }))?;
        out.write_all(b"\n")?;
        for e in &self.examples {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            provenance: Provenance,
        }
        let reader = BufReader::new(util::open_existing(path)?);
        let mut provenance = None;
        let mut examples = Vec::new();
        let mut interned: HashMap<String, Arc<str>> = HashMap::new();
        let mut intern = |s: Arc<str>| -> Arc<str> {
            interned.entry(s.to_string()).or_insert(s).clone()
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let parse_err = |e: serde_json::Error| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            };
            if i == 0 {
                let h: Header = serde_json::from_str(&line).map_err(parse_err)?;
                provenance = Some(h.provenance);
                continue;
            }
            let e: TripletExample = serde_json::from_str(&line).map_err(parse_err)?;
            examples.push(TripletExample {
                query_text: intern(e.query_text),
                positive_text: intern(e.positive_text),
                negative_text: intern(e.negative_text),
                negative_source: e.negative_source,
                collection_id: intern(e.collection_id),
                positive_product_id: intern(e.positive_product_id),
                negative_product_id: intern(e.negative_product_id),
            });
        }
        let provenance = provenance.ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "missing provenance header".into(),
        })?;
        Ok(TripletDataset { provenance, examples })
    }
}
