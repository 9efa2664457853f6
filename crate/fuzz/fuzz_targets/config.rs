#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match ExperimentConfig::parse(text) {
        Ok(cfg) => {
            let n = cfg.grid.iter().fold(1usize, |acc, (_, v)| acc.saturating_mul(v.len()));
            if n <= 10_000 {
                assert_eq!(cfg.combos().len(), n);
            }
            assert_eq!(cfg.hash().len(), 64);
        }
        Err(e) => {
            let _ = e.to_string();
        }
    }
});
