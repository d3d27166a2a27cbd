#![no_main]

use dae_core::corpus::{build_documents, parse_coco_captions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = parse_coco_captions(data) {
        let again = parse_coco_captions(corpus.to_coco_json().as_bytes()).expect("re-parse");
        assert_eq!(again, corpus);
        for stemmed in [false, true] {
            let docs = build_documents(&corpus, stemmed);
            assert_eq!(docs.len(), corpus.image_ids().len());
        }
    }
});
