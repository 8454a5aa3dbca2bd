use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

/// Aggregated traffic for one collection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionLog {
    pub collection_id: String,
    pub views: u64,
    pub clicks: u64,
    pub purchases: u64,
    pub purchased_product_ids: BTreeSet<String>,
    pub n_products: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineMetrics {
    pub ctr: f64,
    pub cvr: f64,
    pub order_diversity: f64,
}

pub fn compute_online_metrics(log: &InteractionLog) -> Result<OnlineMetrics> {
    if log.views == 0 {
        return Err(Error::Contract(format!("collection {} has no views", log.collection_id)));
    }
    if log.n_products == 0 {
        return Err(Error::Contract(format!("collection {} has no products", log.collection_id)));
    }
    let views = log.views as f64;
    Ok(OnlineMetrics {
        ctr: log.clicks as f64 / views,
        cvr: log.purchases as f64 / views,
        order_diversity: log.purchased_product_ids.len() as f64 / log.n_products as f64,
    })
}

/// Mean metric of model-built collections over the mean of expert-built ones.
pub fn relative_score(model: &[f64], expert: &[f64]) -> Result<f64> {
    if model.is_empty() || expert.is_empty() {
        return Err(Error::Contract("relative score needs both lists nonempty".into()));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (m, e) = (mean(model), mean(expert));
    if e == 0.0 {
        return Err(Error::UndefinedRatio("expert mean is zero".into()));
    }
    Ok(m / e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub views_per_collection: u64,
    /// Click probability per view for a product at similarity 1.
    pub base_click_rate: f64,
    pub purchase_rate: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { views_per_collection: 500, base_click_rate: 0.1, purchase_rate: 0.2, seed: 7 }
    }
}

/// Seeded stand-in for live traffic. Each collection is a ranked list of
/// `(product_id, similarity)`; per view, at most one product is clicked,
/// chosen with weight `max(similarity, 0)` and clicked with probability
/// `base_click_rate · mean weight`. Clicks convert at `purchase_rate`.
pub fn simulate_interactions(
    collections: &[(String, Vec<(String, f64)>)],
    cfg: &SimulationConfig,
) -> Result<Vec<InteractionLog>> {
    if !(0.0..=1.0).contains(&cfg.base_click_rate) || !(0.0..=1.0).contains(&cfg.purchase_rate) {
        return Err(Error::config("simulation", "rates must lie in [0, 1]"));
    }
    let mut rng = util::rng(cfg.seed);
    let mut logs = Vec::with_capacity(collections.len());
    for (cid, products) in collections {
        let weights: Vec<f64> = products.iter().map(|(_, s)| s.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        let p_click = if products.is_empty() {
            0.0
        } else {
            (cfg.base_click_rate * total / products.len() as f64).min(1.0)
        };
        let mut log = InteractionLog {
            collection_id: cid.clone(),
            views: cfg.views_per_collection,
            clicks: 0,
            purchases: 0,
            purchased_product_ids: BTreeSet::new(),
            n_products: products.len() as u64,
        };
        for _ in 0..cfg.views_per_collection {
            if total <= 0.0 || !rng.gen_bool(p_click) {
                continue;
            }
            log.clicks += 1;
            let mut pick = rng.gen_range(0.0..total);
            let mut chosen = products.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if pick < *w {
                    chosen = i;
                    break;
                }
                pick -= w;
            }
            if rng.gen_bool(cfg.purchase_rate) {
                log.purchases += 1;
                log.purchased_product_ids.insert(products[chosen].0.clone());
            }
        }
        logs.push(log);
    }
    Ok(logs)
}

pub fn write_interaction_logs(path: &Path, logs: &[InteractionLog]) -> Result<()> {
    util::write_jsonl(path, logs)
}

pub fn read_interaction_logs(path: &Path) -> Result<Vec<InteractionLog>> {
    util::read_jsonl(path)
}
