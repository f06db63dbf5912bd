//! Runs every acceptance criterion once and prints one PASS/FAIL line per
//! criterion. Exits nonzero if any criterion fails.

use dhym_cli::suite::{run, DEFAULT_SEED};

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let start = std::time::Instant::now();
    let outcome = match run(DEFAULT_SEED, dir.path(), &mut std::io::sink()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("acceptance suite aborted: {e}");
            std::process::exit(1);
        }
    };
    for r in &outcome.results {
        println!("{r}");
    }
    let failures = outcome.failures();
    println!(
        "acceptance: {} passed, {failures} failed in {:.0} s",
        outcome.results.len() - failures,
        start.elapsed().as_secs_f64()
    );
    if failures > 0 || outcome.results.len() != 14 {
        std::process::exit(1);
    }
}
