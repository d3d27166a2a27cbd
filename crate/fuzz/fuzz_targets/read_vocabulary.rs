#![no_main]

use dae_core::formats::{read_vocabulary, write_vocabulary, RunMeta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((vocab, meta)) = read_vocabulary(data) {
        let meta = meta.unwrap_or_else(|| RunMeta::new("fuzz", None));
        let (back, _) = read_vocabulary(write_vocabulary(&vocab, &meta).as_bytes()).expect("re-read");
        assert_eq!(back, vocab);
    }
});
