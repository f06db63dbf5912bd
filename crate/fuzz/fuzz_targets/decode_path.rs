#![no_main]

use dhym_core::io::{decode_path, encode_path};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = decode_path(data) {
        let again = encode_path(&p);
        assert_eq!(encode_path(&decode_path(&again).unwrap()), again);
    }
});
