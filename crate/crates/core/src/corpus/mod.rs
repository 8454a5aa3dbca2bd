//! Catalog and collection data model.
//!
//! Products and collections are stored as line-delimited JSON, one record per
//! line. Synthetic corpora additionally carry planted intent ground truth.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

pub use synthetic::{generate_synthetic_corpus, SyntheticConfig, TITLE_STOPWORDS};

/// Maximum number of textual attributes rendered for one product.
pub const MAX_TEXT_ATTRIBUTES: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub product_id: String,
    pub title: String,
    /// Root-first category path, depth 1 to 4.
    pub category_path: Vec<String>,
    /// Price in minor currency units; 0 means unknown.
    pub price: u64,
    #[serde(default)]
    pub brand: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub extra_attrs: Vec<(String, String)>,
    #[serde(default)]
    pub review_count: u64,
    #[serde(default)]
    pub popularity: f64,
}

impl Product {
    /// The most specific category, or "" when the path is empty.
    pub fn leaf_category(&self) -> &str {
        self.category_path.last().map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub product_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub collection_id: String,
    pub title: String,
    pub start_date: NaiveDate,
    pub sections: Vec<Section>,
    /// Set on collections emitted by category-wise augmentation: the single
    /// category every member shares.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmented_category: Option<String>,
}

impl Collection {
    /// Distinct member ids across all sections, sorted.
    pub fn member_ids(&self) -> BTreeSet<&str> {
        self.sections
            .iter()
            .flat_map(|s| s.product_ids.iter().map(String::as_str))
            .collect()
    }

    /// Member count with multiplicity across sections.
    pub fn product_count(&self) -> usize {
        self.sections.iter().map(|s| s.product_ids.len()).sum()
    }
}

/// Category tree as child → parent edges; roots map to `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub parent: BTreeMap<String, Option<String>>,
}

impl Taxonomy {
    pub fn from_products<'a>(products: impl IntoIterator<Item = &'a Product>) -> Self {
        let mut parent = BTreeMap::new();
        for p in products {
            let mut prev: Option<&String> = None;
            for cat in &p.category_path {
                parent.entry(cat.clone()).or_insert_with(|| prev.cloned());
                prev = Some(cat);
            }
        }
        Taxonomy { parent }
    }

    /// Path from the root down to `category`, inclusive.
    pub fn path_to(&self, category: &str) -> Vec<String> {
        let mut path = vec![category.to_string()];
        let mut cur = category;
        while let Some(Some(p)) = self.parent.get(cur) {
            if path.iter().any(|c| c == p) {
                break;
            }
            path.push(p.clone());
            cur = p;
        }
        path.reverse();
        path
    }

    /// Deepest category shared by every path in `categories`.
    pub fn deepest_common_ancestor<'a>(
        &self,
        categories: impl IntoIterator<Item = &'a str>,
    ) -> Option<String> {
        let mut common: Option<Vec<String>> = None;
        for cat in categories {
            let path = self.path_to(cat);
            common = Some(match common {
                None => path,
                Some(prev) => prev
                    .into_iter()
                    .zip(path)
                    .take_while(|(a, b)| a == b)
                    .map(|(a, _)| a)
                    .collect(),
            });
        }
        common.and_then(|c| c.last().cloned())
    }
}

/// Planted ground truth for one synthetic collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedIntent {
    pub intent_tokens: Vec<String>,
    pub ground_truth: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusBundle {
    pub products: Vec<Product>,
    pub collections: Vec<Collection>,
    pub taxonomy: Taxonomy,
    pub planted_truth: Option<BTreeMap<String, PlantedIntent>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl CorpusBundle {
    /// Validates ids and references and builds the id lookup.
    pub fn new(
        products: Vec<Product>,
        collections: Vec<Collection>,
        planted_truth: Option<BTreeMap<String, PlantedIntent>>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(products.len());
        for (i, p) in products.iter().enumerate() {
            if p.title.trim().is_empty() {
                return Err(Error::Contract(format!("product `{}` has an empty title", p.product_id)));
            }
            if p.category_path.is_empty() || p.category_path.len() > 4 {
                return Err(Error::Contract(format!(
                    "product `{}` has category depth {}",
                    p.product_id,
                    p.category_path.len()
                )));
            }
            if index.insert(p.product_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(p.product_id.clone()));
            }
        }
        let mut dangling = BTreeSet::new();
        let mut seen_collections = BTreeSet::new();
        for c in &collections {
            if !seen_collections.insert(c.collection_id.as_str()) {
                return Err(Error::DuplicateId(c.collection_id.clone()));
            }
            if c.sections.is_empty() {
                return Err(Error::Contract(format!("collection `{}` has no sections", c.collection_id)));
            }
            for s in &c.sections {
                if s.product_ids.is_empty() {
                    return Err(Error::Contract(format!(
                        "section `{}` of collection `{}` is empty",
                        s.name, c.collection_id
                    )));
                }
                for id in &s.product_ids {
                    if !index.contains_key(id) {
                        dangling.insert(id.clone());
                    }
                }
            }
        }
        if !dangling.is_empty() {
            return Err(Error::DanglingReference(dangling.into_iter().collect()));
        }
        let taxonomy = Taxonomy::from_products(&products);
        Ok(CorpusBundle {
            products,
            collections,
            taxonomy,
            planted_truth,
            index,
        })
    }

    pub fn product(&self, id: &str) -> Option<&Product> {
        self.index.get(id).map(|&i| &self.products[i])
    }

    pub fn is_synthetic(&self) -> bool {
        self.planted_truth.is_some()
    }

    /// Same products and taxonomy with a replaced collection list.
    pub fn with_collections(&self, collections: Vec<Collection>) -> Result<Self> {
        CorpusBundle::new(self.products.clone(), collections, self.planted_truth.clone())
    }

    pub fn collection(&self, id: &str) -> Option<&Collection> {
        self.collections.iter().find(|c| c.collection_id == id)
    }

    /// Canonical JSON serialization; equal bundles serialize to equal bytes.
    pub fn to_json_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn content_hash(&self) -> Result<String> {
        Ok(util::sha256_hex(&self.to_json_bytes()?))
    }

    /// Writes `products.jsonl`, `collections.jsonl` and, for synthetic
    /// corpora, `planted_truth.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        util::write_jsonl(&dir.join("products.jsonl"), &self.products)?;
        util::write_jsonl(&dir.join("collections.jsonl"), &self.collections)?;
        if let Some(truth) = &self.planted_truth {
            std::fs::write(dir.join("planted_truth.json"), serde_json::to_vec_pretty(truth)?)?;
        }
        Ok(())
    }

    /// Reads a directory written by [`CorpusBundle::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut bundle = load_corpus(&dir.join("products.jsonl"), &dir.join("collections.jsonl"))?;
        let truth_path = dir.join("planted_truth.json");
        if truth_path.exists() {
            bundle.planted_truth = Some(serde_json::from_slice(&std::fs::read(truth_path)?)?);
        }
        Ok(bundle)
    }
}

/// Loads and validates a corpus from two line-delimited JSON files.
pub fn load_corpus(products_path: &Path, collections_path: &Path) -> Result<CorpusBundle> {
    let products: Vec<Product> = util::read_jsonl(products_path)?;
    let collections: Vec<Collection> = util::read_jsonl(collections_path)?;
    if collections.is_empty() {
        log::warn!("{} contains zero collections", collections_path.display());
    }
    CorpusBundle::new(products, collections, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_collections: usize,
    pub n_sections: usize,
    pub n_products_in_collections: usize,
    pub avg_products_per_collection: f64,
    pub avg_products_per_section: f64,
    pub n_categories: usize,
}

/// Collection statistics; products are counted with multiplicity.
pub fn corpus_stats(bundle: &CorpusBundle) -> CorpusStats {
    let n_collections = bundle.collections.len();
    let n_sections: usize = bundle.collections.iter().map(|c| c.sections.len()).sum();
    let n_products_in_collections: usize =
        bundle.collections.iter().map(Collection::product_count).sum();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let n_categories = bundle
        .products
        .iter()
        .map(Product::leaf_category)
        .collect::<BTreeSet<_>>()
        .len();
    CorpusStats {
        n_collections,
        n_sections,
        n_products_in_collections,
        avg_products_per_collection: ratio(n_products_in_collections, n_collections),
        avg_products_per_section: ratio(n_products_in_collections, n_sections),
        n_categories,
    }
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<32}{:>12}", "Collections", self.n_collections)?;
        writeln!(f, "{:<32}{:>12}", "Sections in Collections", self.n_sections)?;
        writeln!(f, "{:<32}{:>12}", "Products in Collections", self.n_products_in_collections)?;
        writeln!(f, "{:<32}{:>12.2}", "Avg. Product per Collection", self.avg_products_per_collection)?;
        writeln!(f, "{:<32}{:>12.2}", "Avg. Product per Section", self.avg_products_per_section)?;
        write!(f, "{:<32}{:>12}", "Total Product Categories", self.n_categories)
    }
}

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

/// "June 15" style rendering used inside query text.
pub fn month_day(date: NaiveDate) -> String {
    format!("{} {}", MONTHS[date.month0() as usize], date.day())
}

/// True when `text` is a "Month Day" rendering produced by [`month_day`].
pub fn is_month_day(text: &str) -> bool {
    let mut parts = text.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(m), Some(d), None) => {
            MONTHS.iter().any(|name| name.eq_ignore_ascii_case(m))
                && d.parse::<u32>().map(|d| (1..=31).contains(&d)).unwrap_or(false)
        }
        _ => false,
    }
}
