#![no_main]

use dae_core::formats::read_embeddings;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(vectors) = read_embeddings(data) {
        let mut dims = vectors.values().map(Vec::len);
        if let Some(d) = dims.next() {
            assert!(dims.all(|x| x == d));
        }
    }
});
