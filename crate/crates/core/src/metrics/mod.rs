//! Attribute-prediction F1 and caption metrics (BLEU, ROUGE-L, CIDEr-D).

mod bleu;
mod cider;
mod f1;
mod rouge;

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::corpus::{tokenize, CaptionCorpus};
use crate::{Error, Result};

pub use bleu::{bleu, modified_precision, BleuScores};
pub use cider::{cider_d, CiderScores, CIDER_SIGMA};
pub use f1::{attribute_f1, bin_of, AttributeF1, BinnedConfusion, N_BINS};
pub use rouge::{rouge_l, ROUGE_BETA};

/// Counts of every n-gram of order `n`.
pub(crate) fn ngram_counts<S: AsRef<str> + Eq + std::hash::Hash>(
    tokens: &[S],
    n: usize,
) -> HashMap<&[S], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageCaptionScores {
    pub image_id: u64,
    pub caption: String,
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub cider_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaptionEvalReport {
    pub n_images: usize,
    /// Corpus-level BLEU-1..4.
    pub bleu: [f64; 4],
    pub rouge_l: f64,
    pub cider_d: f64,
    pub per_image: Vec<ImageCaptionScores>,
}

/// Scores one generated caption per image against the reference corpus.
/// Text is tokenized with the corpus tokenizer, without stemming.
pub fn evaluate_captions(
    predictions: &[(u64, String)],
    references: &CaptionCorpus,
) -> Result<CaptionEvalReport> {
    if predictions.is_empty() {
        return Err(Error::Empty("no captions to evaluate".into()));
    }
    let refs: BTreeMap<u64, Vec<Vec<String>>> = references
        .grouped()
        .into_iter()
        .map(|(id, caps)| (id, caps.iter().map(|c| tokenize(c)).collect()))
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut missing = Vec::new();
    for (id, _) in predictions {
        if !seen.insert(*id) {
            return Err(Error::parse(
                "caption predictions",
                format!("image {id} has more than one caption"),
            ));
        }
        if !refs.contains_key(id) {
            missing.push(*id);
        }
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::Join { missing });
    }

    let candidates: Vec<Vec<String>> = predictions.iter().map(|(_, c)| tokenize(c)).collect();
    let ref_sets: Vec<Vec<Vec<String>>> =
        predictions.iter().map(|(id, _)| refs[id].clone()).collect();
    let corpus_bleu = bleu(&candidates, &ref_sets, 4)?;
    let cider = cider_d(&candidates, &ref_sets)?;
    let mut per_image = Vec::with_capacity(predictions.len());
    let mut rouge_sum = 0.0;
    for (k, (id, caption)) in predictions.iter().enumerate() {
        let sentence = bleu(&candidates[k..=k], &ref_sets[k..=k], 4)?;
        let rouge = rouge_l(&candidates[k], &ref_sets[k], ROUGE_BETA);
        rouge_sum += rouge;
        per_image.push(ImageCaptionScores {
            image_id: *id,
            caption: caption.clone(),
            bleu: to_four(&sentence.scores),
            rouge_l: rouge,
            cider_d: cider.per_image[k],
        });
    }
    Ok(CaptionEvalReport {
        n_images: predictions.len(),
        bleu: to_four(&corpus_bleu.scores),
        rouge_l: rouge_sum / predictions.len() as f64,
        cider_d: cider.score,
        per_image,
    })
}

fn to_four(scores: &[f64]) -> [f64; 4] {
    let mut out = [0.0; 4];
    out.copy_from_slice(&scores[..4]);
    out
}
