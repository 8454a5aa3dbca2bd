//! Central-difference verification of the analytic triplet gradient.

use super::train::{accumulate_triplet, GradBuffer};
use super::{distance, mean_pool_into, EncoderParams};
use crate::error::{Error, Result};
use crate::text::{tokenize, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(1e-8, |numeric|)` over checked coordinates.
    pub max_rel_error: f64,
    pub n_checked: usize,
    /// Coordinates whose ± perturbations straddle the hinge; not asserted.
    pub n_kink: usize,
    /// True when the unperturbed triplet sits exactly on the hinge.
    pub at_kink: bool,
}

/// Hinge argument split into its two distances.
fn distances(params: &EncoderParams, ids: [&[u32]; 3]) -> (f64, f64) {
    let dim = params.dim;
    let mut e = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    for (out, seq) in e.iter_mut().zip(ids) {
        mean_pool_into(&params.table, dim, seq, out);
    }
    (distance(&e[0], &e[1]), distance(&e[0], &e[2]))
}

/// Compares the analytic gradient of one triplet against central differences
/// over every coordinate of every touched token row.
pub fn finite_diff_check(
    params: &EncoderParams,
    texts: [&str; 3],
    vocab: &Vocabulary,
    margin: f64,
    eps: f64,
) -> Result<GradCheck> {
    if !(eps > 0.0) {
        return Err(Error::config("eps", "must be positive"));
    }
    let seqs: Vec<Vec<u32>> = texts.iter().map(|t| tokenize(t, vocab).ids).collect();
    let ids = [seqs[0].as_slice(), seqs[1].as_slice(), seqs[2].as_slice()];
    for seq in &ids {
        params.embed_ids(seq)?;
    }

    let mut buf = GradBuffer::new(params.vocab_size, params.dim);
    accumulate_triplet(params, ids, margin, false, 1.0, &mut buf);
    let (dp0, dn0) = distances(params, ids);
    let at_kink = dp0 - dn0 + margin == 0.0;

    let mut rows: Vec<u32> = ids.iter().flat_map(|s| s.iter().copied()).collect();
    rows.sort_unstable();
    rows.dedup();

    let mut work = params.clone();
    let mut report = GradCheck { max_rel_error: 0.0, n_checked: 0, n_kink: 0, at_kink };
    for &row in &rows {
        for c in 0..params.dim {
            let idx = row as usize * params.dim + c;
            let orig = work.table[idx];
            work.table[idx] = orig + eps;
            let (dp_hi, dn_hi) = distances(&work, ids);
            work.table[idx] = orig - eps;
            let (dp_lo, dn_lo) = distances(&work, ids);
            work.table[idx] = orig;

            let active_hi = dp_hi - dn_hi + margin > 0.0;
            let active_lo = dp_lo - dn_lo + margin > 0.0;
            let numeric = match (active_hi, active_lo) {
                // margin cancels inside the active region
                (true, true) => ((dp_hi - dp_lo) - (dn_hi - dn_lo)) / (2.0 * eps),
                (false, false) => 0.0,
                _ => {
                    report.n_kink += 1;
                    continue;
                }
            };
            let analytic = buf.grad[idx];
            let rel = (analytic - numeric).abs() / numeric.abs().max(1e-8);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.n_checked += 1;
        }
    }
    Ok(report)
}
