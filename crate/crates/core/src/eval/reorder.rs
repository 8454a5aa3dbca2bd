use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub popularity: f64,
    pub review_count: f64,
}

impl Features {
    fn is_finite(&self) -> bool {
        self.popularity.is_finite() && self.review_count.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReorderOutcome {
    pub order: Vec<String>,
    /// `[intercept, popularity, review_count]`; `None` on the fallback path.
    pub coefficients: Option<[f64; 3]>,
    /// The design matrix was rank deficient, so candidates were ordered by
    /// popularity instead.
    pub singular_fallback: bool,
}

/// Ordinary least squares with an intercept on `training`, then candidates
/// sorted by predicted relevance (descending, stable).
pub fn reorder_products(candidates: &[(String, Features)], training: &[(Features, f64)]) -> Result<ReorderOutcome> {
    if training.len() < 2 {
        return Err(Error::Contract("reordering needs at least two training pairs".into()));
    }
    if training.iter().any(|(f, y)| !f.is_finite() || !y.is_finite()) || candidates.iter().any(|(_, f)| !f.is_finite())
    {
        return Err(Error::Contract("features and labels must be finite".into()));
    }
    let x = DMatrix::from_fn(training.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => training[i].0.popularity,
        _ => training[i].0.review_count,
    });
    let y = DVector::from_iterator(training.len(), training.iter().map(|(_, y)| *y));
    let svd = x.svd(true, true);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);

    let (scores, coefficients): (Vec<f64>, _) = if svd.rank(tol) < 3 {
        log::warn!("rank-deficient reordering fit; falling back to popularity order");
        (candidates.iter().map(|(_, f)| f.popularity).collect(), None)
    } else {
        let beta = svd.solve(&y, tol).map_err(|e| Error::Contract(e.to_string()))?;
        let b = [beta[0], beta[1], beta[2]];
        let scores = candidates
            .iter()
            .map(|(_, f)| b[0] + b[1] * f.popularity + b[2] * f.review_count)
            .collect();
        (scores, Some(b))
    };
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(ReorderOutcome {
        order: order.into_iter().map(|i| candidates[i].0.clone()).collect(),
        singular_fallback: coefficients.is_none(),
        coefficients,
    })
}
