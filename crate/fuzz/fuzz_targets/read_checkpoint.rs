#![no_main]

use dae_core::formats::{
    attrnet_from_checkpoint, attrnet_to_checkpoint, read_checkpoint, scn_from_checkpoint,
    scn_to_checkpoint, write_checkpoint,
};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(ckpt) = read_checkpoint(data) else {
        return;
    };
    let again = read_checkpoint(&write_checkpoint(&ckpt)).expect("re-read");
    assert_eq!(again.tensors, ckpt.tensors);
    if let Ok((members, meta)) = attrnet_from_checkpoint(&ckpt) {
        let back = attrnet_from_checkpoint(&attrnet_to_checkpoint(&members, &meta).unwrap()).unwrap();
        assert_eq!(back.0, members);
    }
    if let Ok((members, meta)) = scn_from_checkpoint(&ckpt) {
        let back = scn_from_checkpoint(&scn_to_checkpoint(&members, &meta).unwrap()).unwrap();
        assert_eq!(back.0, members);
    }
});
