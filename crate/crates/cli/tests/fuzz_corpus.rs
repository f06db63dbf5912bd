//! Replays the checked-in fuzz corpus through the same entry points the fuzz
//! targets drive, so a seed that once crashed keeps being exercised.

use std::path::PathBuf;

use dhym_cli::config::RunConfig;
use dhym_core::formula::Formula;
use dhym_core::io::{decode_field, decode_path, encode_field, encode_path};
use dhym_core::TorusGrid;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn field_seeds() {
    let mut decoded = 0;
    for (name, bytes) in seeds("decode_field") {
        if let Ok(f) = decode_field(&bytes) {
            assert_eq!(encode_field(&f), bytes, "{name}");
            decoded += 1;
        }
    }
    assert!(decoded >= 2);
}

#[test]
fn path_seeds() {
    let mut decoded = 0;
    for (name, bytes) in seeds("decode_path") {
        if let Ok(p) = decode_path(&bytes) {
            assert_eq!(encode_path(&p), bytes, "{name}");
            decoded += 1;
        }
    }
    assert!(decoded >= 1);
}

#[test]
fn formula_seeds() {
    let g = TorusGrid::standard(1, 8).unwrap();
    for (name, bytes) in seeds("parse_formula") {
        let src = String::from_utf8(bytes).unwrap();
        match Formula::parse(&src) {
            Ok(f) => {
                assert!(f.eval(&[0.3, -1.2, 2.0, 0.7]).is_finite(), "{name}");
                if f.complex_dim_used() <= 1 {
                    f.sample(g).unwrap();
                }
            }
            Err(_) => assert_eq!(name, "unbalanced"),
        }
    }
}

#[test]
fn config_seeds() {
    for (name, bytes) in seeds("parse_config") {
        let c = RunConfig::parse(std::str::from_utf8(&bytes).unwrap(), None).unwrap_or_else(|e| panic!("{name}: {e}"));
        c.grid().unwrap();
    }
}
