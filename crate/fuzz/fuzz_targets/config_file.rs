#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for sub in ["extract", "train-captioner"] {
        if let Ok(flags) = dae_cli::config_flags(data, sub) {
            assert!(flags.iter().all(|f| !f.starts_with("--config")));
        }
    }
});
