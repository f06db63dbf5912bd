#![no_main]

use dhym_core::formula::Formula;
use dhym_core::TorusGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(f) = Formula::parse(src) {
        let _ = f.eval(&[0.3, -1.2, 2.0, 0.7]);
        if f.complex_dim_used() <= 1 {
            let _ = f.sample(TorusGrid::standard(1, 8).unwrap());
        }
    }
});
