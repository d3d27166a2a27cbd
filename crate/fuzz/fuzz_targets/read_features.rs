#![no_main]

use dae_core::formats::{read_features, write_features};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = read_features(data) {
        // Every accepted file is canonical.
        let bytes = write_features(&file.records, file.dim).expect("write back");
        assert_eq!(bytes, data);
    }
});
