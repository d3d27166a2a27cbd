use std::collections::HashMap;

use serde::Serialize;

use super::ngram_counts;
use crate::{Error, Result};

/// Standard deviation of the Gaussian length penalty.
pub const CIDER_SIGMA: f64 = 6.0;
const MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiderScores {
    /// Mean of `per_image`.
    pub score: f64,
    pub per_image: Vec<f64>,
}

/// TF-IDF weighted n-gram vector of one sentence, per order.
struct Weighted<'a> {
    vecs: Vec<HashMap<&'a [String], f64>>,
    norms: Vec<f64>,
    len: usize,
}

impl<'a> Weighted<'a> {
    fn new(tokens: &'a [String], df: &HashMap<&[String], usize>, log_n: f64) -> Self {
        let mut vecs = Vec::with_capacity(MAX_N);
        let mut norms = Vec::with_capacity(MAX_N);
        for n in 1..=MAX_N {
            let v: HashMap<&[String], f64> = ngram_counts(tokens, n)
                .into_iter()
                .map(|(g, tf)| {
                    let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
                    (g, tf as f64 * (log_n - d.ln()))
                })
                .collect();
            norms.push(v.values().map(|w| w * w).sum::<f64>().sqrt());
            vecs.push(v);
        }
        Self {
            vecs,
            norms,
            len: tokens.len(),
        }
    }

    /// Per-order clipped cosine with a length penalty.
    fn similarity(&self, reference: &Weighted) -> [f64; MAX_N] {
        let delta = self.len as f64 - reference.len as f64;
        let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
        let mut out = [0.0; MAX_N];
        for (n, slot) in out.iter_mut().enumerate() {
            let mut dot = 0.0;
            for (g, &h) in &self.vecs[n] {
                if let Some(&r) = reference.vecs[n].get(g) {
                    dot += h.min(r) * r;
                }
            }
            if self.norms[n] != 0.0 && reference.norms[n] != 0.0 {
                dot /= self.norms[n] * reference.norms[n];
            }
            *slot = dot * penalty;
        }
        out
    }
}

/// CIDEr-D with n-gram document frequencies taken over the reference sets of
/// the evaluated images. With a single image every IDF weight is 0.
pub fn cider_d(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<CiderScores> {
    if candidates.is_empty() {
        return Err(Error::Empty("CIDEr-D needs at least one candidate".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::dims(
            "CIDEr-D reference sets",
            &[references.len()],
            &[candidates.len()],
        ));
    }
    if let Some(i) = references.iter().position(Vec::is_empty) {
        return Err(Error::Empty(format!("candidate {i} has no references")));
    }
    let mut df: HashMap<&[String], usize> = HashMap::new();
    for refs in references {
        let mut seen = std::collections::HashSet::new();
        for r in refs {
            for n in 1..=MAX_N {
                seen.extend(r.windows(n));
            }
        }
        for g in seen {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let log_n = (references.len() as f64).ln();
    let per_image: Vec<f64> = candidates
        .iter()
        .zip(references)
        .map(|(cand, refs)| {
            let hyp = Weighted::new(cand, &df, log_n);
            let total: f64 = refs
                .iter()
                .map(|r| {
                    let sims = hyp.similarity(&Weighted::new(r, &df, log_n));
                    sims.iter().sum::<f64>() / MAX_N as f64
                })
                .sum();
            total / refs.len() as f64 * 10.0
        })
        .collect();
    let score = per_image.iter().sum::<f64>() / per_image.len() as f64;
    Ok(CiderScores { score, per_image })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identical_single_references() {
        let a = toks("a man rides a red bike");
        let b = toks("two dogs chase the ball");
        let r = cider_d(&[a.clone(), b.clone()], &[vec![a], vec![b]]).unwrap();
        for s in &r.per_image {
            assert!((s - 10.0).abs() < 1e-6, "{s}");
        }
    }

    #[test]
    fn hand_computed_pair() {
        // Image 1 shares "x" with image 2's reference, so "x" has df 2 and
        // weight 0; the unigram "y" has weight ln 2.
        let c = vec![toks("x y"), toks("z")];
        let r = vec![vec![toks("x y")], vec![toks("x z")]];
        let s = cider_d(&c, &r).unwrap();
        // Image 1: unigram cosine 1, bigram cosine 1, orders 3 and 4 empty.
        assert!((s.per_image[0] - 10.0 * 2.0 / 4.0).abs() < 1e-12);
        // Image 2: unigram cosine 1 (x has zero weight), length 1 vs 2.
        let penalty = (-1.0f64 / 72.0).exp();
        assert!((s.per_image[1] - 10.0 * penalty / 4.0).abs() < 1e-12);
    }

    #[test]
    fn no_overlap_scores_zero() {
        let r = cider_d(
            &[toks("p q r s"), toks("a b c d")],
            &[vec![toks("w x y z")], vec![toks("a b c d")]],
        )
        .unwrap();
        assert_eq!(r.per_image[0], 0.0);
    }

    #[test]
    fn junk_padding_lowers_score() {
        let refs = vec![
            vec![toks("a dog runs on the grass")],
            vec![toks("a cat sleeps on a sofa")],
        ];
        let base = cider_d(
            &[toks("a dog runs on the grass"), toks("a cat sleeps")],
            &refs,
        )
        .unwrap();
        let padded = cider_d(
            &[
                toks("a dog runs on the grass qq rr ss tt uu vv"),
                toks("a cat sleeps"),
            ],
            &refs,
        )
        .unwrap();
        assert!(padded.per_image[0] < base.per_image[0]);
    }

    #[test]
    fn errors() {
        assert!(cider_d(&[], &[]).is_err());
        assert!(cider_d(&[toks("a")], &[vec![]]).is_err());
    }

    proptest! {
        #[test]
        fn bounded(
            data in proptest::collection::vec(
                (proptest::collection::vec("[abcd]", 0..7), proptest::collection::vec(proptest::collection::vec("[abcde]", 1..7), 1..3)),
                1..5,
            )
        ) {
            let (c, r): (Vec<_>, Vec<_>) = data.into_iter().unzip();
            let s = cider_d(&c, &r).unwrap();
            for v in &s.per_image {
                prop_assert!((0.0..=10.0 + 1e-9).contains(v), "{}", v);
            }
        }
    }
}
