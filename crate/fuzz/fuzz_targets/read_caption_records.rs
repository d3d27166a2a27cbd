#![no_main]

use dae_core::formats::{read_caption_records, write_caption_records};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_caption_records(data) {
        let back = read_caption_records(write_caption_records(&records).as_bytes()).expect("re-read");
        assert_eq!(back, records);
    }
});
