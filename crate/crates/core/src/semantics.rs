//! Distinctive-attribute ground truth from caption documents.
//!
//! A word's score in an image is its average term frequency over that image's
//! captions times its smoothed inverse document frequency,
//!
//! ```text
//! TF_av(w, d) = TF(w, d) / N_c
//! IDF(w)      = log((N_d + 1) / (DF(w) + 1)) + 1
//! ```
//!
//! restricted to the vocabulary and L2-normalized per image. The vocabulary
//! keeps the words whose IDF is strictly below a threshold, i.e. the words
//! that are frequent enough across images to be learnable.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::{Error, Result};

/// Logarithm used by the IDF formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// Base 10, the default. A threshold of 5 then keeps words seen in more
    /// than 1/10^4 of the images.
    #[default]
    Ten,
    /// Natural logarithm, the convention of common TF-IDF toolkits.
    Natural,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Ten => x.log10(),
            LogBase::Natural => x.ln(),
        }
    }
}

/// Smoothed IDF in base 10: `log10((n_docs + 1) / (df + 1)) + 1`.
pub fn compute_idf(df: usize, n_docs: usize) -> f64 {
    compute_idf_with_base(df, n_docs, LogBase::Ten)
}

pub fn compute_idf_with_base(df: usize, n_docs: usize, base: LogBase) -> f64 {
    base.log((n_docs as f64 + 1.0) / (df as f64 + 1.0)) + 1.0
}

/// Occurrences of `word` in the document divided by its caption count.
pub fn term_frequency_avg(doc: &Document, word: &str) -> f64 {
    if doc.n_captions() == 0 {
        return 0.0;
    }
    let count = doc.tokens().filter(|t| *t == word).count();
    count as f64 / doc.n_captions() as f64
}

/// Document and term counts over a set of documents.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    n_docs: usize,
    df: BTreeMap<String, usize>,
    tf: Vec<BTreeMap<String, u32>>,
    base: LogBase,
}

impl CorpusStats {
    pub fn from_documents(docs: &[Document], base: LogBase) -> Self {
        let tf: Vec<BTreeMap<String, u32>> = docs
            .iter()
            .map(|doc| {
                let mut counts = BTreeMap::new();
                for token in doc.tokens() {
                    *counts.entry(token.to_string()).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        let mut df = BTreeMap::new();
        for counts in &tf {
            for word in counts.keys() {
                *df.entry(word.clone()).or_insert(0) += 1;
            }
        }
        Self {
            n_docs: docs.len(),
            df,
            tf,
            base,
        }
    }

    /// `N_d`.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, word: &str) -> usize {
        self.df.get(word).copied().unwrap_or(0)
    }

    /// Raw count of `word` in document `doc_index`.
    pub fn tf(&self, doc_index: usize, word: &str) -> u32 {
        self.tf[doc_index].get(word).copied().unwrap_or(0)
    }

    /// Number of distinct words across all documents.
    pub fn distinct_words(&self) -> usize {
        self.df.len()
    }

    pub fn idf(&self, word: &str) -> f64 {
        compute_idf_with_base(self.df(word), self.n_docs, self.base)
    }

    /// Every word with IDF strictly below `th_idf`, ordered by ascending IDF
    /// then lexicographically.
    pub fn vocabulary(&self, th_idf: f64, stemmed: bool) -> Result<Vocabulary> {
        if th_idf.is_nan() || th_idf <= 0.0 {
            return Err(Error::Param(format!(
                "IDF threshold must be positive, got {th_idf}"
            )));
        }
        let mut entries: Vec<(&str, f64)> = self
            .df
            .iter()
            .map(|(word, &df)| {
                (
                    word.as_str(),
                    compute_idf_with_base(df, self.n_docs, self.base),
                )
            })
            .filter(|(_, idf)| *idf < th_idf)
            .collect();
        entries.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        Vocabulary::new(
            entries.iter().map(|(w, _)| w.to_string()).collect(),
            entries.iter().map(|(_, idf)| *idf).collect(),
            th_idf,
            stemmed,
            self.base,
        )
    }

    /// Vocabulary size for each threshold, alongside the total word count.
    pub fn vocabulary_report(&self, thresholds: &[f64]) -> Result<VocabReport> {
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Param("thresholds must be ascending".into()));
        }
        let mut idfs: Vec<f64> = self.df.keys().map(|w| self.idf(w)).collect();
        idfs.sort_by(f64::total_cmp);
        let mut rows = Vec::with_capacity(thresholds.len());
        for &th in thresholds {
            if th.is_nan() || th <= 0.0 {
                return Err(Error::Param(format!(
                    "IDF threshold must be positive, got {th}"
                )));
            }
            rows.push(VocabReportRow {
                threshold: th,
                size: idfs.partition_point(|idf| *idf < th),
            });
        }
        Ok(VocabReport {
            n_docs: self.n_docs,
            total_words: self.distinct_words(),
            rows,
        })
    }
}

/// Builds the base-10 vocabulary for `th_idf` over `docs`.
pub fn build_vocabulary(docs: &[Document], th_idf: f64, stemmed: bool) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::Empty("no documents".into()));
    }
    CorpusStats::from_documents(docs, LogBase::Ten).vocabulary(th_idf, stemmed)
}

/// Table of vocabulary size per threshold, base-10 IDF.
pub fn corpus_vocabulary_report(docs: &[Document], thresholds: &[f64]) -> Result<VocabReport> {
    CorpusStats::from_documents(docs, LogBase::Ten).vocabulary_report(thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabReportRow {
    pub threshold: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabReport {
    pub n_docs: usize,
    pub total_words: usize,
    pub rows: Vec<VocabReportRow>,
}

/// Ordered attribute words with their IDF. The word order defines the
/// attribute index space.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    idf: Vec<f64>,
    threshold: f64,
    stemmed: bool,
    log_base: LogBase,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(
        words: Vec<String>,
        idf: Vec<f64>,
        threshold: f64,
        stemmed: bool,
        log_base: LogBase,
    ) -> Result<Self> {
        if words.len() != idf.len() {
            return Err(Error::dims(
                "vocabulary words vs idf",
                &[words.len()],
                &[idf.len()],
            ));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            if index.insert(word.clone(), i).is_some() {
                return Err(Error::parse_at(
                    "vocabulary",
                    i,
                    format!("duplicate word {word:?}"),
                ));
            }
        }
        if let Some(i) = idf.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::parse_at(
                "vocabulary",
                i,
                "IDF must be positive and finite",
            ));
        }
        Ok(Self {
            words,
            idf,
            threshold,
            stemmed,
            log_base,
            index,
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn stemmed(&self) -> bool {
        self.stemmed
    }

    pub fn log_base(&self) -> LogBase {
        self.log_base
    }

    /// `N_w`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Dense per-image attribute scores over a vocabulary: ground truth `D_g` or a
/// prediction `D_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeVector {
    pub image_id: u64,
    pub values: Vec<f64>,
}

impl AttributeVector {
    pub fn zeros(image_id: u64, len: usize) -> Self {
        Self {
            image_id,
            values: vec![0.0; len],
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Scales `raw` to unit L2 norm; all-zero input stays zero.
pub fn l2_normalize(raw: &[f64]) -> Vec<f64> {
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        raw.iter().map(|v| v / norm).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// TF-IDF of every vocabulary word in `doc`, L2-normalized over the
/// vocabulary. Words outside the vocabulary do not contribute to the norm.
pub fn ground_truth_attributes(doc: &Document, vocab: &Vocabulary) -> AttributeVector {
    let mut counts = vec![0u32; vocab.len()];
    for token in doc.tokens() {
        if let Some(i) = vocab.index_of(token) {
            counts[i] += 1;
        }
    }
    let n_captions = doc.n_captions().max(1) as f64;
    let raw: Vec<f64> = counts
        .iter()
        .zip(vocab.idf())
        .map(|(&count, &idf)| count as f64 / n_captions * idf)
        .collect();
    AttributeVector {
        image_id: doc.image_id,
        values: l2_normalize(&raw),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_documents, CaptionCorpus};
    use proptest::prelude::*;

    fn t1() -> Vec<Document> {
        let records = vec![
            (1, "the cat sits".to_string()),
            (1, "a cat sleeps".to_string()),
            (2, "a dog runs".to_string()),
            (2, "the dog barks".to_string()),
            (3, "a cat and a dog".to_string()),
        ];
        build_documents(&CaptionCorpus::from_records(records).unwrap(), false)
    }

    #[test]
    fn idf_values() {
        assert_eq!(compute_idf(4, 4), 1.0);
        assert_eq!(compute_idf(0, 9), 2.0);
        assert!((compute_idf(2, 3) - (1.0 + (4.0f64 / 3.0).log10())).abs() < 1e-15);
        assert!((compute_idf(2, 3) - 1.12494).abs() < 1e-5);
    }

    #[test]
    fn threshold_five_keeps_words_above_one_in_ten_thousand() {
        // IDF < 5  <=>  (N + 1) / (df + 1) < 10^4.
        let n = 82_783;
        for df in [1usize, 7, 8, 9, 100, 5000] {
            let kept = compute_idf(df, n) < 5.0;
            assert_eq!(kept, (df as f64 + 1.0) > (n as f64 + 1.0) / 1e4, "df {df}");
        }
    }

    #[test]
    fn average_term_frequency() {
        let docs = t1();
        assert_eq!(term_frequency_avg(&docs[0], "cat"), 1.0);
        assert_eq!(term_frequency_avg(&docs[0], "dog"), 0.0);
        let records = (0..5)
            .map(|i| {
                let text = if i < 3 {
                    "man with surfboard"
                } else {
                    "man in water"
                };
                (1, text.to_string())
            })
            .collect();
        let doc = &build_documents(&CaptionCorpus::from_records(records).unwrap(), false)[0];
        assert_eq!(term_frequency_avg(doc, "surfboard"), 0.6);
    }

    #[test]
    fn t1_vocabulary_at_1_2() {
        let vocab = build_vocabulary(&t1(), 1.2, false).unwrap();
        // "cat" (d1, d3), "dog" (d2, d3), "the" (d1, d2) each appear in 2 of 3 docs.
        assert_eq!(vocab.words(), &["cat", "dog", "the"]);
        for idf in vocab.idf() {
            assert!((idf - 1.12494).abs() < 1e-5);
        }
        let all = build_vocabulary(&t1(), 1e9, false).unwrap();
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn t1_cat_attribute() {
        let docs = t1();
        let vocab = build_vocabulary(&docs, 1e9, false).unwrap();
        let dg = ground_truth_attributes(&docs[0], &vocab);
        let cat = dg.values[vocab.index_of("cat").unwrap()];
        assert!((cat - 0.72191).abs() < 1e-5, "{cat}");
        assert!((dg.l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_documents() {
        let docs = t1();
        let vocab =
            Vocabulary::new(vec!["zebra".into()], vec![2.0], 3.0, false, LogBase::Ten).unwrap();
        assert_eq!(ground_truth_attributes(&docs[0], &vocab).values, vec![0.0]);
        let vocab = build_vocabulary(&docs, 1.2, false).unwrap();
        // d3 = "a cat and a dog": "cat" and "dog" are both in the vocabulary.
        let only_sits =
            Vocabulary::new(vec!["sits".into()], vec![1.3], 3.0, false, LogBase::Ten).unwrap();
        assert_eq!(
            ground_truth_attributes(&docs[0], &only_sits).values,
            vec![1.0]
        );
        assert_eq!(ground_truth_attributes(&docs[2], &vocab).values.len(), 3);
    }

    #[test]
    fn report_rows() {
        let report = corpus_vocabulary_report(&t1(), &[1.0, 1.2, 3.0]).unwrap();
        let sizes: Vec<usize> = report.rows.iter().map(|r| r.size).collect();
        assert_eq!(sizes, vec![0, 3, 8]);
        assert_eq!(report.total_words, 8);
        assert!(corpus_vocabulary_report(&t1(), &[2.0, 1.0]).is_err());

        let single = &t1()[..1];
        let report = corpus_vocabulary_report(single, &[1.0, 1.0001]).unwrap();
        assert_eq!(report.rows[0].size, 0);
        assert_eq!(report.rows[1].size, report.total_words);
    }

    #[test]
    fn rejects_bad_thresholds_and_empty_input() {
        assert!(build_vocabulary(&t1(), 0.0, false).is_err());
        assert!(build_vocabulary(&t1(), f64::NAN, false).is_err());
        assert!(build_vocabulary(&[], 1.0, false).is_err());
    }

    #[test]
    fn natural_log_base() {
        let idf = compute_idf_with_base(0, 9, LogBase::Natural);
        assert!((idf - (10f64.ln() + 1.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn normalization_is_scale_invariant(
            raw in prop::collection::vec(0.0f64..10.0, 1..20),
            scale in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = raw.iter().map(|v| v * scale).collect();
            for (a, b) in l2_normalize(&raw).iter().zip(l2_normalize(&scaled)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
