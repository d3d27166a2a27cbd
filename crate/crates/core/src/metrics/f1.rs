use std::collections::HashMap;

use serde::Serialize;

use crate::semantics::AttributeVector;
use crate::{Error, Result};

pub const N_BINS: usize = 4;

/// Bin `1..=4` of a score in `[0, 1]`, upper edges inclusive; `None` for 0.
pub fn bin_of(score: f64) -> Result<Option<usize>> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Param(format!("score {score} outside [0, 1]")));
    }
    Ok(match score {
        0.0 => None,
        s if s <= 0.25 => Some(1),
        s if s <= 0.5 => Some(2),
        s if s <= 0.75 => Some(3),
        _ => Some(4),
    })
}

/// One-vs-rest counts per bin; index 0 is bin 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BinnedConfusion {
    pub true_positives: [u64; N_BINS],
    pub false_positives: [u64; N_BINS],
    pub false_negatives: [u64; N_BINS],
    /// Elements with non-zero ground truth.
    pub included: u64,
    /// Elements with zero ground truth.
    pub excluded: u64,
}

impl BinnedConfusion {
    /// Ground-truth elements falling in each bin.
    pub fn support(&self, bin: usize) -> u64 {
        self.true_positives[bin] + self.false_negatives[bin]
    }

    pub fn bin_f1(&self, bin: usize) -> Option<f64> {
        f1(
            self.true_positives[bin],
            self.false_positives[bin],
            self.false_negatives[bin],
        )
    }
}

fn f1(tp: u64, fp: u64, fn_: u64) -> Option<f64> {
    let denom = 2 * tp + fp + fn_;
    (denom > 0).then(|| 2.0 * tp as f64 / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeF1 {
    /// Mean F1 over bins holding at least one ground-truth element.
    pub macro_f1: f64,
    /// F1 of the pooled counts.
    pub micro_f1: f64,
    /// Per-bin F1; `None` for bins without ground truth or predictions.
    pub per_bin: [Option<f64>; N_BINS],
    pub confusion: BinnedConfusion,
}

/// Binned F1 between predicted and ground-truth attribute vectors matched by
/// image id. Elements whose ground truth is 0 are skipped; predictions are
/// clamped to `[0, 1]`, and a clamped prediction of 0 counts as a miss.
pub fn attribute_f1(
    predictions: &[AttributeVector],
    ground_truth: &[AttributeVector],
) -> Result<AttributeF1> {
    let mut by_id: HashMap<u64, &AttributeVector> = HashMap::with_capacity(ground_truth.len());
    for gt in ground_truth {
        if by_id.insert(gt.image_id, gt).is_some() {
            return Err(Error::parse(
                "ground-truth attributes",
                format!("duplicate image {}", gt.image_id),
            ));
        }
    }
    if predictions.len() != ground_truth.len() {
        return Err(Error::dims(
            "attribute image sets",
            &[predictions.len()],
            &[ground_truth.len()],
        ));
    }
    let mut missing: Vec<u64> = predictions
        .iter()
        .filter(|p| !by_id.contains_key(&p.image_id))
        .map(|p| p.image_id)
        .collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        missing.dedup();
        return Err(Error::Join { missing });
    }

    let mut c = BinnedConfusion::default();
    let mut matched = std::collections::HashSet::with_capacity(predictions.len());
    for pred in predictions {
        if !matched.insert(pred.image_id) {
            return Err(Error::parse(
                "predicted attributes",
                format!("duplicate image {}", pred.image_id),
            ));
        }
        let gt = by_id[&pred.image_id];
        if gt.values.len() != pred.values.len() {
            return Err(Error::dims(
                "attribute vector",
                &[pred.values.len()],
                &[gt.values.len()],
            ));
        }
        for (&g, &p) in gt.values.iter().zip(&pred.values) {
            if p.is_nan() {
                return Err(Error::NonFinite(format!(
                    "prediction for image {}",
                    pred.image_id
                )));
            }
            let Some(truth) = bin_of(g)? else {
                c.excluded += 1;
                continue;
            };
            c.included += 1;
            let guess = bin_of(p.clamp(0.0, 1.0))?;
            if guess == Some(truth) {
                c.true_positives[truth - 1] += 1;
            } else {
                c.false_negatives[truth - 1] += 1;
                if let Some(b) = guess {
                    c.false_positives[b - 1] += 1;
                }
            }
        }
    }
    if c.included == 0 {
        return Err(Error::Empty(
            "no non-zero ground-truth elements to score".into(),
        ));
    }

    let per_bin = [0, 1, 2, 3].map(|b| c.bin_f1(b));
    let supported: Vec<f64> = (0..N_BINS)
        .filter(|&b| c.support(b) > 0)
        .map(|b| per_bin[b].unwrap_or(0.0))
        .collect();
    let macro_f1 = supported.iter().sum::<f64>() / supported.len() as f64;
    let micro_f1 = f1(
        c.true_positives.iter().sum(),
        c.false_positives.iter().sum(),
        c.false_negatives.iter().sum(),
    )
    .unwrap_or(0.0);
    Ok(AttributeF1 {
        macro_f1,
        micro_f1,
        per_bin,
        confusion: c,
    })
}
