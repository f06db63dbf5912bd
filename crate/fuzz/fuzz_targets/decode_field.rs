#![no_main]

use dhym_core::io::{decode_field, encode_field};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = decode_field(data) {
        let again = encode_field(&f);
        assert_eq!(decode_field(&again).unwrap().values().len(), f.values().len());
        assert_eq!(encode_field(&decode_field(&again).unwrap()), again);
    }
});
