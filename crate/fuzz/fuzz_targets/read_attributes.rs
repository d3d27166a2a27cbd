#![no_main]

use dae_core::formats::{read_attributes, write_attributes, RunMeta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = read_attributes(data) {
        let meta = file.meta.clone().unwrap_or_else(|| RunMeta::new("fuzz", None));
        let text = write_attributes(&file.vectors, file.n_attrs, &meta).expect("write back");
        let back = read_attributes(text.as_bytes()).expect("re-read");
        assert_eq!(back.vectors, file.vectors);
    }
});
