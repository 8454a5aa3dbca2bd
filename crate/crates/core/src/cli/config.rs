//! Run configuration and the flat `key = value` config format.
//!
//! ```text
//! # comments start with '#'
//! preset = hard15          # applied before the other keys
//! seed = 7
//! n_products = 2000
//! max_steps = 20000
//! ```
//!
//! Keys: `preset seed out aug_ratio n_random n_bm25 n_products n_categories
//! n_collections semantic_gap products collections vocab_min_freq dim margin
//! batch_size max_steps eval_interval learning_rate optimizer
//! normalize_embeddings min_review_count min_gt k`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::SyntheticConfig;
use crate::dataset::NegSamplingConfig;
use crate::encoder::{Optimizer, TrainConfig};
use crate::error::{Error, Result};
use crate::util;

/// A named negative-sampling and augmentation setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub n_random_same_category: usize,
    pub n_bm25: usize,
    pub aug_ratio: f64,
}

pub const PRESETS: [Preset; 5] = [
    Preset { name: "easy0", n_random_same_category: 25, n_bm25: 0, aug_ratio: 0.0 },
    Preset { name: "hard0", n_random_same_category: 10, n_bm25: 15, aug_ratio: 0.0 },
    Preset { name: "hard15", n_random_same_category: 10, n_bm25: 15, aug_ratio: 0.15 },
    Preset { name: "hard40", n_random_same_category: 10, n_bm25: 15, aug_ratio: 0.40 },
    Preset { name: "hard55", n_random_same_category: 10, n_bm25: 15, aug_ratio: 0.55 },
];

pub fn preset(name: &str) -> Result<Preset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            Error::config("preset", format!("unknown preset `{name}` (expected one of {})", names.join(", ")))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub min_review_count: u64,
    pub min_gt: usize,
    pub k: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { min_review_count: 1, min_gt: 5, k: 100 }
    }
}

/// Everything a pipeline run depends on. Component seeds are derived from
/// `seed` (see [`RunConfig::seeds`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub corpus: SyntheticConfig,
    /// Load this catalog instead of generating one.
    pub products: Option<PathBuf>,
    pub collections: Option<PathBuf>,
    pub aug_ratio: f64,
    pub n_random_same_category: usize,
    pub n_bm25: usize,
    pub vocab_min_freq: usize,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub corpus: u64,
    pub augmentation: u64,
    pub pairs: u64,
    pub negatives: u64,
    pub train: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            preset: Some("hard0".into()),
            seed: 7,
            out: PathBuf::from("out"),
            corpus: SyntheticConfig::default(),
            products: None,
            collections: None,
            aug_ratio: 0.0,
            n_random_same_category: 10,
            n_bm25: 15,
            vocab_min_freq: 1,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        };
        cfg.set_seed(7);
        cfg
    }
}

impl RunConfig {
    pub fn from_preset(name: &str, seed: u64) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_preset(name)?;
        cfg.set_seed(seed);
        Ok(cfg)
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let p = preset(name)?;
        self.preset = Some(p.name.to_string());
        self.n_random_same_category = p.n_random_same_category;
        self.n_bm25 = p.n_bm25;
        self.aug_ratio = p.aug_ratio;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.corpus.seed = seed;
        self.train.seed = self.seeds().train;
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            corpus: self.corpus.seed,
            augmentation: util::mix_seed(self.seed, 1),
            pairs: util::mix_seed(self.seed, 2),
            negatives: util::mix_seed(self.seed, 3),
            train: util::mix_seed(self.seed, 4),
        }
    }

    pub fn negatives(&self) -> NegSamplingConfig {
        NegSamplingConfig {
            n_random_same_category: self.n_random_same_category,
            n_bm25: self.n_bm25,
            seed: self.seeds().negatives,
        }
    }

    /// The preset name when negatives and ratio still match it, else "custom".
    pub fn model_name(&self) -> String {
        match self.preset.as_deref().and_then(|n| preset(n).ok()) {
            Some(p)
                if p.n_random_same_category == self.n_random_same_category
                    && p.n_bm25 == self.n_bm25
                    && p.aug_ratio == self.aug_ratio =>
            {
                format!("PR_{}", p.name)
            }
            _ => "PR_custom".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.products.is_none() {
            self.corpus.validate()?;
        }
        if self.products.is_some() != self.collections.is_some() {
            return Err(Error::config("products", "products and collections must be given together"));
        }
        if !(0.0..=1.0).contains(&self.aug_ratio) {
            return Err(Error::config("aug_ratio", "must lie in [0, 1]"));
        }
        self.negatives().validate()?;
        self.train.validate()?;
        if self.eval.min_gt == 0 {
            return Err(Error::config("min_gt", "must be at least 1"));
        }
        if self.eval.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        util::sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    /// Sets one key; used by the config file parser.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
        }
        match key {
            "preset" => self.apply_preset(value)?,
            "seed" => self.set_seed(num(key, value)?),
            "out" => self.out = PathBuf::from(value),
            "aug_ratio" => self.aug_ratio = num(key, value)?,
            "n_random" => self.n_random_same_category = num(key, value)?,
            "n_bm25" => self.n_bm25 = num(key, value)?,
            "n_products" => self.corpus.n_products = num(key, value)?,
            "n_categories" => self.corpus.n_categories = num(key, value)?,
            "n_collections" => self.corpus.n_collections = num(key, value)?,
            "semantic_gap" => self.corpus.semantic_gap = num(key, value)?,
            "products" => self.products = Some(PathBuf::from(value)),
            "collections" => self.collections = Some(PathBuf::from(value)),
            "vocab_min_freq" => self.vocab_min_freq = num(key, value)?,
            "dim" => self.train.dim = num(key, value)?,
            "margin" => self.train.margin = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "max_steps" => self.train.max_steps = num(key, value)?,
            "eval_interval" => self.train.eval_interval = num(key, value)?,
            "learning_rate" => self.train.learning_rate = num(key, value)?,
            "optimizer" => {
                self.train.optimizer = match value {
                    "adam" => Optimizer::adam(),
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(Error::config(key, format!("expected adam or sgd, got `{value}`"))),
                }
            }
            "normalize_embeddings" => self.train.normalize_embeddings = num(key, value)?,
            "min_review_count" => self.eval.min_review_count = num(key, value)?,
            "min_gt" => self.eval.min_gt = num(key, value)?,
            "k" => self.eval.k = num(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Parses the flat format on top of the defaults. `preset` and `seed`
    /// are applied first so that other keys can override them.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries: BTreeMap<usize, (String, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            entries.insert(i, (k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = RunConfig::default();
        for first in ["preset", "seed"] {
            for (k, v) in entries.values().filter(|(k, _)| k == first) {
                cfg.set(k, v)?;
            }
        }
        for (k, v) in entries.values().filter(|(k, _)| k != "preset" && k != "seed") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}
