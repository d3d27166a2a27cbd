use serde::Serialize;

use super::ngram_counts;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScores {
    /// BLEU-1..max_n.
    pub scores: Vec<f64>,
    /// Modified n-gram precisions, orders 1..max_n.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_length: usize,
    pub reference_length: usize,
}

/// Reference-clipped n-gram matches and the candidate's n-gram total.
pub fn modified_precision(
    candidate: &[String],
    references: &[Vec<String>],
    n: usize,
) -> (usize, usize) {
    let counts = ngram_counts(candidate, n);
    let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r, n)).collect();
    let clipped = counts
        .iter()
        .map(|(gram, &c)| {
            let max_ref = ref_counts
                .iter()
                .filter_map(|r| r.get(gram))
                .max()
                .copied()
                .unwrap_or(0);
            c.min(max_ref)
        })
        .sum();
    (
        clipped,
        candidate.len().saturating_sub(n - 1).min(candidate.len()),
    )
}

/// Reference length closest to `len`, the shorter one on ties.
fn closest_length(len: usize, references: &[Vec<String>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

/// Corpus-level BLEU without smoothing: pooled clipped precisions, geometric
/// mean over orders, brevity penalty from summed closest reference lengths.
pub fn bleu(
    candidates: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    max_n: usize,
) -> Result<BleuScores> {
    if candidates.is_empty() {
        return Err(Error::Empty("BLEU needs at least one candidate".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::dims(
            "BLEU reference sets",
            &[references.len()],
            &[candidates.len()],
        ));
    }
    if max_n == 0 {
        return Err(Error::Param("BLEU order must be at least 1".into()));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::Empty(format!("candidate {i} has no references")));
    }
    let mut clipped = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let mut c_len = 0;
    let mut r_len = 0;
    for (cand, refs) in candidates.iter().zip(references) {
        for n in 1..=max_n {
            let (m, t) = modified_precision(cand, refs, n);
            clipped[n - 1] += m;
            totals[n - 1] += t;
        }
        c_len += cand.len();
        r_len += closest_length(cand.len(), refs);
    }
    let precisions: Vec<f64> = clipped
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = match (c_len, r_len) {
        (0, _) => 0.0,
        (c, r) if c < r => (1.0 - r as f64 / c as f64).exp(),
        _ => 1.0,
    };
    let mut log_sum = 0.0;
    let scores = precisions
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            log_sum += p.ln();
            if log_sum == f64::NEG_INFINITY {
                0.0
            } else {
                brevity_penalty * (log_sum / (k + 1) as f64).exp()
            }
        })
        .collect();
    Ok(BleuScores {
        scores,
        precisions,
        brevity_penalty,
        candidate_length: c_len,
        reference_length: r_len,
    })
}
