//! Caption ingestion: COCO annotation parsing, tokenization, stemming and
//! per-image document assembly.

mod porter;

use std::collections::HashMap;

use serde_json::Value;

use crate::{Error, Result};

pub use porter::stem;

/// All (image id, caption) pairs of an annotation file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaptionCorpus {
    records: Vec<(u64, String)>,
    image_ids: Vec<u64>,
}

impl CaptionCorpus {
    /// Builds a corpus from records; image ids are kept in first-seen order.
    pub fn from_records(records: Vec<(u64, String)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut image_ids = Vec::new();
        for (index, (id, caption)) in records.iter().enumerate() {
            if caption.is_empty() {
                return Err(Error::parse_at("captions", index, "empty caption"));
            }
            if seen.insert(*id) {
                image_ids.push(*id);
            }
        }
        Ok(Self { records, image_ids })
    }

    pub fn records(&self) -> &[(u64, String)] {
        &self.records
    }

    pub fn image_ids(&self) -> &[u64] {
        &self.image_ids
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Captions of every image, grouped in corpus image order.
    pub fn grouped(&self) -> Vec<(u64, Vec<&str>)> {
        let slot: HashMap<u64, usize> = self
            .image_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, i))
            .collect();
        let mut groups: Vec<(u64, Vec<&str>)> =
            self.image_ids.iter().map(|id| (*id, Vec::new())).collect();
        for (id, caption) in &self.records {
            groups[slot[id]].1.push(caption.as_str());
        }
        groups
    }

    /// Restricts the corpus to the given images, keeping record order.
    pub fn subset(&self, ids: &[u64]) -> CaptionCorpus {
        let keep: std::collections::HashSet<u64> = ids.iter().copied().collect();
        let records = self
            .records
            .iter()
            .filter(|(id, _)| keep.contains(id))
            .cloned()
            .collect();
        CaptionCorpus::from_records(records).expect("subset of a valid corpus")
    }

    /// Serializes back to a minimal COCO annotation object.
    pub fn to_coco_json(&self) -> String {
        let annotations: Vec<Value> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, (id, caption))| {
                serde_json::json!({ "id": i, "image_id": id, "caption": caption })
            })
            .collect();
        serde_json::json!({ "annotations": annotations }).to_string()
    }
}

/// Parses a COCO-2014 caption annotation file. Only the `annotations` array is
/// consumed; each entry needs an integer `image_id` and a string `caption`.
pub fn parse_coco_captions(bytes: &[u8]) -> Result<CaptionCorpus> {
    const CTX: &str = "caption annotations";
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| Error::parse(CTX, e.to_string()))?;
    let annotations = root
        .get("annotations")
        .ok_or_else(|| Error::parse(CTX, "missing \"annotations\" array"))?
        .as_array()
        .ok_or_else(|| Error::parse(CTX, "\"annotations\" is not an array"))?;

    let mut records = Vec::with_capacity(annotations.len());
    for (index, entry) in annotations.iter().enumerate() {
        let image_id = entry
            .get("image_id")
            .ok_or_else(|| Error::parse_at(CTX, index, "missing \"image_id\""))?
            .as_u64()
            .ok_or_else(|| {
                Error::parse_at(CTX, index, "\"image_id\" is not a non-negative integer")
            })?;
        let caption = entry
            .get("caption")
            .ok_or_else(|| Error::parse_at(CTX, index, "missing \"caption\""))?
            .as_str()
            .ok_or_else(|| Error::parse_at(CTX, index, "\"caption\" is not a string"))?;
        if caption.is_empty() {
            return Err(Error::parse_at(CTX, index, "empty caption"));
        }
        records.push((image_id, caption.to_string()));
    }
    CaptionCorpus::from_records(records)
}

/// Lowercased maximal runs of ASCII alphanumerics with at least `min_len`
/// characters. Everything else separates tokens.
pub fn tokenize_min(text: &str, min_len: usize) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|run| !run.is_empty() && run.len() >= min_len)
        .map(|run| run.to_ascii_lowercase())
        .collect()
}

/// The attribute tokenizer: lowercase ASCII alphanumeric runs of length >= 2.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_min(text, 2)
}

/// One image's reference captions as token lists: the TF-IDF document unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub image_id: u64,
    pub captions: Vec<Vec<String>>,
}

impl Document {
    /// Number of captions, `N_c`.
    pub fn n_captions(&self) -> usize {
        self.captions.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.captions.iter().flatten().map(String::as_str)
    }
}

/// Groups a corpus into one document per image in corpus order, stemming
/// tokens when `use_stemming` is set.
pub fn build_documents(corpus: &CaptionCorpus, use_stemming: bool) -> Vec<Document> {
    let mut stems: HashMap<String, String> = HashMap::new();
    corpus
        .grouped()
        .into_iter()
        .map(|(image_id, captions)| Document {
            image_id,
            captions: captions
                .into_iter()
                .map(|caption| {
                    let tokens = tokenize(caption);
                    if !use_stemming {
                        return tokens;
                    }
                    tokens
                        .into_iter()
                        .map(|t| stems.entry(t).or_insert_with_key(|t| stem(t)).clone())
                        .collect()
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = r#"{"images": [], "annotations": [
        {"image_id": 7, "id": 1, "caption": "Two horses pull a carriage."},
        {"image_id": 9, "id": 2, "caption": "A man looking at apples"},
        {"image_id": 7, "id": 3, "caption": "horses on a street"},
        {"image_id": 9, "id": 4, "caption": "the man looks at vegetables"},
        {"image_id": 9, "id": 5, "caption": "someone shopping"}
    ]}"#;

    #[test]
    fn parses_records_and_first_seen_ids() {
        let corpus = parse_coco_captions(FIXTURE.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 5);
        assert_eq!(corpus.image_ids(), &[7, 9]);
    }

    #[test]
    fn empty_annotations_is_empty_corpus() {
        let corpus = parse_coco_captions(br#"{"annotations": []}"#).unwrap();
        assert!(corpus.is_empty());
        assert!(corpus.image_ids().is_empty());
    }

    #[test]
    fn missing_caption_names_record() {
        let err = parse_coco_captions(
            br#"{"annotations": [{"image_id": 1, "caption": "ok"}, {"image_id": 2}]}"#,
        )
        .unwrap_err();
        match err {
            Error::Parse { index, message, .. } => {
                assert_eq!(index, Some(1));
                assert!(message.contains("caption"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_containers_and_ids() {
        assert!(parse_coco_captions(b"[1, 2]").is_err());
        assert!(parse_coco_captions(b"{\"annotations\": 3}").is_err());
        assert!(parse_coco_captions(b"not json").is_err());
        let err = parse_coco_captions(br#"{"annotations": [{"image_id": "x", "caption": "a"}]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { index: Some(0), .. }));
        let err = parse_coco_captions(br#"{"annotations": [{"image_id": 1.5, "caption": "a"}]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { index: Some(0), .. }));
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("A man, riding!"), vec!["man", "riding"]);
        assert_eq!(tokenize("Wine-glass"), vec!["wine", "glass"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("café au lait"), vec!["caf", "au", "lait"]);
        assert_eq!(
            tokenize("2 cats on 10th st"),
            vec!["cats", "on", "10th", "st"]
        );
    }

    #[test]
    fn documents_follow_corpus_order() {
        let corpus = parse_coco_captions(FIXTURE.as_bytes()).unwrap();
        let docs = build_documents(&corpus, true);
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].image_id, 7);
        assert_eq!(docs[0].n_captions(), 2);
        assert_eq!(docs[1].n_captions(), 3);
        assert_eq!(docs[0].captions[1], vec!["hors", "on", "street"]);
        assert_eq!(docs[1].captions[0], vec!["man", "look", "at", "appl"]);

        let plain = build_documents(&corpus, false);
        assert_eq!(
            plain[0].captions[0],
            vec!["two", "horses", "pull", "carriage"]
        );
    }

    #[test]
    fn two_horses_stems() {
        let corpus = CaptionCorpus::from_records(vec![(1, "two horses".into())]).unwrap();
        let docs = build_documents(&corpus, true);
        assert_eq!(docs[0].captions[0], vec!["two", "hors"]);
    }

    #[test]
    fn five_captions_give_five() {
        let records = (0..5).map(|i| (3, format!("caption number {i}"))).collect();
        let docs = build_documents(&CaptionCorpus::from_records(records).unwrap(), false);
        assert_eq!(docs[0].n_captions(), 5);
    }

    #[test]
    fn stem_is_idempotent_on_t1_tokens() {
        let t1 = [
            "the cat sits",
            "a cat sleeps",
            "a dog runs",
            "the dog barks",
            "a cat and a dog",
        ];
        for caption in t1 {
            for token in tokenize(caption) {
                let once = stem(&token);
                assert_eq!(stem(&once), once, "token {token}");
            }
        }
    }

    #[test]
    fn stem_is_not_idempotent_in_general() {
        assert_eq!(stem("horses"), "hors");
        assert_eq!(stem("hors"), "hor");
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }

        #[test]
        fn document_count_matches_ids(ids in prop::collection::vec(0u64..20, 0..40)) {
            let records = ids.iter().map(|id| (*id, format!("caption for {id}"))).collect();
            let corpus = CaptionCorpus::from_records(records).unwrap();
            let distinct: std::collections::HashSet<_> = ids.iter().collect();
            prop_assert_eq!(build_documents(&corpus, true).len(), distinct.len());
        }

        #[test]
        fn coco_round_trip(records in prop::collection::vec((0u64..1000, "[ -~]{1,30}"), 0..20)) {
            let corpus = CaptionCorpus::from_records(records.clone()).unwrap();
            let reparsed = parse_coco_captions(corpus.to_coco_json().as_bytes()).unwrap();
            prop_assert_eq!(reparsed.records(), &records[..]);
        }
    }
}
