//! Seeded synthetic catalog with planted intent ground truth.
//!
//! Every collection carries a latent intent of four tokens: two shared with
//! its sibling collections (same theme) and two of its own. Member products
//! receive each intent token in their tags with probability `1 - gap`, and
//! always at least one of the collection's own two. The collection title
//! spells each intent token either literally or, with probability `gap`, as a
//! paraphrase word that never occurs on the product side.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Collection, CorpusBundle, PlantedIntent, Product, Section};
use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_products: usize,
    pub n_categories: usize,
    pub n_collections: usize,
    /// Probability that an intent token is paraphrased in the title and
    /// withheld from a member product.
    pub semantic_gap: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            n_products: 2000,
            n_categories: 5,
            n_collections: 100,
            semantic_gap: 0.7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_categories < 2 {
            return Err(Error::config("n_categories", "must be at least 2"));
        }
        if self.n_products < self.n_categories {
            return Err(Error::config("n_products", "must be at least n_categories"));
        }
        if self.n_collections < 1 {
            return Err(Error::config("n_collections", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.semantic_gap) {
            return Err(Error::config("semantic_gap", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

const CATEGORIES: &[(&str, &str)] = &[
    ("clothing", "skirts"),
    ("clothing", "pants"),
    ("clothing", "shirts"),
    ("shoes", "sneakers"),
    ("bags", "backpacks"),
    ("accessories", "hats"),
    ("clothing", "dresses"),
    ("underwear", "socks"),
    ("goods", "mugs"),
    ("clothing", "jeans"),
    ("clothing", "coats"),
    ("shoes", "boots"),
    ("bags", "totes"),
    ("accessories", "scarves"),
    ("clothing", "blouses"),
    ("underwear", "bras"),
    ("goods", "candles"),
    ("clothing", "sweaters"),
    ("shoes", "sandals"),
    ("bags", "wallets"),
    ("accessories", "belts"),
    ("clothing", "hoodies"),
    ("underwear", "pajamas"),
    ("goods", "cushions"),
    ("clothing", "shorts"),
    ("shoes", "loafers"),
    ("bags", "clutches"),
    ("accessories", "sunglasses"),
    ("clothing", "jackets"),
    ("underwear", "briefs"),
    ("goods", "blankets"),
    ("clothing", "cardigans"),
    ("shoes", "heels"),
    ("bags", "pouches"),
    ("accessories", "watches"),
    ("clothing", "leggings"),
    ("underwear", "camisoles"),
    ("goods", "towels"),
    ("clothing", "vests"),
    ("shoes", "slippers"),
    ("bags", "suitcases"),
    ("accessories", "necklaces"),
    ("clothing", "swimsuits"),
    ("underwear", "tights"),
    ("goods", "tumblers"),
    ("accessories", "earrings"),
    ("accessories", "gloves"),
    ("goods", "notebooks"),
    ("accessories", "beanies"),
    ("accessories", "bracelets"),
];

const BRANDS: &[&str] = &[
    "H&M", "Uniqlo", "Zara", "Nike", "Adidas", "Muji", "Gap", "Levis", "Puma", "Fila", "Mango",
    "Arket", "Spao", "Vans", "Converse", "Reebok", "Asics", "Topten", "Kangol", "Lacoste",
];
const STYLES: &[&str] = &[
    "basic", "daily", "simple", "casual", "vintage", "modern", "classic", "sporty", "formal",
    "cozy", "slim", "oversized", "retro", "minimal", "relaxed", "cropped",
];
const COLORS: &[&str] = &[
    "black", "white", "navy", "beige", "grey", "ivory", "khaki", "pink", "mint", "olive",
    "brown", "red", "blue", "yellow", "lavender",
];
const MATERIALS: &[&str] = &[
    "cotton", "linen", "denim", "wool", "leather", "nylon", "polyester", "silk", "knit",
    "fleece", "canvas", "suede",
];
const FITS: &[&str] = &["regular", "loose", "tight", "wide", "standard"];
const SECTION_WORDS: &[&str] = &[
    "bright", "pretty", "pastel", "tone", "light", "warm", "soft", "bold", "chic", "trendy",
    "cute", "neat", "lovely", "fresh", "gentle", "calm",
];
const SECTION_TAILS: &[&str] = &["edit", "mood", "looks", "style", "moment"];
const TITLE_FILLERS: &[&str] = &["best", "for", "your", "with", "picks", "the", "lovers", "my"];

const INTENT_SYLLABLES: &[&str] = &["ka", "ro", "mi", "te", "su", "lo", "va", "ne", "pi", "do", "ri", "ze"];
const PARAPHRASE_SYLLABLES: &[&str] = &[
    "bu", "gha", "fen", "wox", "yul", "thi", "quo", "jem", "plo", "dra", "sni", "cav",
];

/// Deterministic three-syllable pseudo-word for `index`.
fn pseudo_word(syllables: &[&str], index: usize) -> String {
    let n = syllables.len();
    // odd stride keeps consecutive indices from sharing a prefix
    let scrambled = (index * 611 + 97) % (n * n * n);
    let (a, b, c) = (scrambled / (n * n), (scrambled / n) % n, scrambled % n);
    format!("{}{}{}", syllables[a], syllables[b], syllables[c])
}

fn category_name(i: usize) -> (String, String) {
    match CATEGORIES.get(i) {
        Some((root, leaf)) => (root.to_string(), leaf.to_string()),
        None => ("misc".to_string(), format!("category{i}")),
    }
}

const SIBLINGS_PER_THEME: usize = 4;
const THEME_CATEGORIES: usize = 4;
/// Share of section names that end with their main leaf category.
const SECTION_NAMES_CATEGORY: f64 = 0.3;

/// Generates a deterministic corpus with planted intent ground truth.
pub fn generate_synthetic_corpus(config: &SyntheticConfig) -> Result<CorpusBundle> {
    config.validate()?;
    let gap = config.semantic_gap;
    let mut rng = util::rng(config.seed);

    // geometric category weights for the long tail
    let decay: f64 = 0.9;
    let weights: Vec<f64> = (0..config.n_categories).map(|i| decay.powi(i as i32)).collect();
    let total_weight: f64 = weights.iter().sum();
    let sample_category = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut u = rng.gen::<f64>() * total_weight;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        config.n_categories - 1
    };

    let mut products = Vec::with_capacity(config.n_products);
    let mut by_category: Vec<Vec<usize>> = vec![Vec::new(); config.n_categories];
    for i in 0..config.n_products {
        let cat = if i < config.n_categories { i } else { sample_category(&mut rng) };
        let (root, leaf) = category_name(cat);
        let brand = *BRANDS.choose(&mut rng).unwrap();
        let style = *STYLES.choose(&mut rng).unwrap();
        let color = *COLORS.choose(&mut rng).unwrap();
        let material = *MATERIALS.choose(&mut rng).unwrap();
        let fit = *FITS.choose(&mut rng).unwrap();
        let second_style = *STYLES.choose(&mut rng).unwrap();
        let review_count = if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..=400) };
        let mut tags = vec![style.to_string()];
        if second_style != style {
            tags.push(second_style.to_string());
        }
        products.push(Product {
            product_id: format!("P{i:05}"),
            title: format!("{brand} {style} {color} {leaf}"),
            category_path: vec![root, leaf],
            price: rng.gen_range(50..=3000) * 100,
            brand: brand.to_string(),
            tags,
            extra_attrs: vec![
                ("color".to_string(), color.to_string()),
                ("material".to_string(), material.to_string()),
                ("fit".to_string(), fit.to_string()),
            ],
            review_count,
            popularity: (rng.gen::<f64>() * 1000.0).round() / 1000.0,
        });
        by_category[cat].push(i);
    }

    let n_themes = config.n_collections.div_ceil(SIBLINGS_PER_THEME);
    let theme_categories: Vec<Vec<usize>> = (0..n_themes)
        .map(|_| {
            let mut cats = BTreeSet::new();
            while cats.len() < THEME_CATEGORIES.min(config.n_categories) {
                cats.insert(sample_category(&mut rng));
            }
            cats.into_iter().collect()
        })
        .collect();

    let epoch = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
    let mut collections = Vec::with_capacity(config.n_collections);
    let mut planted = BTreeMap::new();
    let mut word_index = 0usize;
    let mut theme_tokens: Vec<[usize; 2]> = Vec::with_capacity(n_themes);
    for _ in 0..n_themes {
        theme_tokens.push([word_index, word_index + 1]);
        word_index += 2;
    }

    for j in 0..config.n_collections {
        let theme = j / SIBLINGS_PER_THEME;
        let token_ids = [theme_tokens[theme][0], theme_tokens[theme][1], word_index, word_index + 1];
        word_index += 2;
        let intent: Vec<String> = token_ids.iter().map(|&t| pseudo_word(INTENT_SYLLABLES, t)).collect();
        let paraphrase: Vec<String> =
            token_ids.iter().map(|&t| pseudo_word(PARAPHRASE_SYLLABLES, t)).collect();

        // member categories: 2 or 3 from the theme pool, widened when too small
        let mut cats: Vec<usize> = theme_categories[theme].clone();
        cats.shuffle(&mut rng);
        cats.truncate(rng.gen_range(2..=3).min(cats.len()));
        let target = rng.gen_range(40..=160).min(config.n_products).max(5.min(config.n_products));
        let mut pool: Vec<usize> = cats.iter().flat_map(|&c| by_category[c].iter().copied()).collect();
        let mut next_cat = 0;
        while pool.len() < target && next_cat < config.n_categories {
            if !cats.contains(&next_cat) {
                cats.push(next_cat);
                pool.extend(by_category[next_cat].iter().copied());
            }
            next_cat += 1;
        }
        pool.sort_unstable();
        let mut members: Vec<usize> = pool.choose_multiple(&mut rng, target).copied().collect();
        members.sort_unstable();

        // plant intent tokens on the product side
        for &m in &members {
            let mut carried: Vec<&String> = intent.iter().filter(|_| rng.gen_bool(1.0 - gap)).collect();
            // every member keeps at least one token of its own collection
            if !carried.iter().any(|t| intent[2..].contains(t)) {
                carried.push(intent[2..].choose(&mut rng).unwrap());
            }
            let tags = &mut products[m].tags;
            for tok in carried {
                if !tags.contains(tok) {
                    tags.push(tok.clone());
                }
            }
        }

        // sections: group member categories
        let mut member_cats: Vec<usize> = cats
            .iter()
            .copied()
            .filter(|c| members.iter().any(|&m| by_category[*c].contains(&m)))
            .collect();
        member_cats.sort_unstable();
        let roll: f64 = rng.gen();
        let wanted = if roll < 0.45 { 1 } else if roll < 0.95 { 2 } else { 3 };
        let n_sections = wanted.min(member_cats.len()).max(1);
        let chunk = member_cats.len().div_ceil(n_sections);
        let mut sections = Vec::new();
        for group in member_cats.chunks(chunk) {
            let ids: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&m| group.iter().any(|c| by_category[*c].binary_search(&m).is_ok()))
                .collect();
            if ids.is_empty() {
                continue;
            }
            let largest = *group
                .iter()
                .max_by_key(|c| (ids.iter().filter(|&&m| by_category[**c].binary_search(&m).is_ok()).count(), std::cmp::Reverse(**c)))
                .unwrap();
            let a = *SECTION_WORDS.choose(&mut rng).unwrap();
            let b = *SECTION_WORDS.choose(&mut rng).unwrap();
            let (_, leaf) = category_name(largest);
            let tail = if rng.gen_bool(SECTION_NAMES_CATEGORY) { leaf.as_str() } else { *SECTION_TAILS.choose(&mut rng).unwrap() };
            let name = if a == b { format!("{a} {tail}") } else { format!("{a} {b} {tail}") };
            sections.push(Section {
                name: capitalize(&name),
                product_ids: ids.iter().map(|&m| products[m].product_id.clone()).collect(),
            });
        }

        let title = render_title(&intent, &paraphrase, gap, &mut rng);
        let start_date = epoch + Duration::days(rng.gen_range(0..912));
        let collection_id = format!("C{j:04}");
        planted.insert(
            collection_id.clone(),
            PlantedIntent {
                intent_tokens: intent.clone(),
                ground_truth: members.iter().map(|&m| products[m].product_id.clone()).collect(),
            },
        );
        collections.push(Collection {
            collection_id,
            title,
            start_date,
            sections,
            augmented_category: None,
        });
    }

    CorpusBundle::new(products, collections, Some(planted))
}

fn render_title(
    intent: &[String],
    paraphrase: &[String],
    gap: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> String {
    let mut words: Vec<&str> = Vec::new();
    if rng.gen_bool(0.5) {
        words.push(TITLE_FILLERS.choose(rng).unwrap());
    }
    for (i, (lit, para)) in intent.iter().zip(paraphrase).enumerate() {
        words.push(if rng.gen_bool(gap) { para } else { lit });
        if i == 1 {
            words.push(TITLE_FILLERS.choose(rng).unwrap());
        }
    }
    if rng.gen_bool(0.5) {
        words.push("collection");
    }
    capitalize(&words.join(" "))
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Default stopwords for lexical queries over synthetic titles.
pub const TITLE_STOPWORDS: &[&str] = &[
    "collection", "best", "for", "your", "with", "picks", "the", "lovers", "my", "a", "and", "of",
    "to", "in",
];
