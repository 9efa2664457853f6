#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_core::dyadic::DyadicCover;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cover) = DyadicCover::<2>::from_json(text, 1.0) {
        if cover.len() <= 256 {
            let out = cover.regularize();
            assert!(out.satisfies_condition());
            assert!(out.budget() <= cover.budget() * (1.0 + 1e-12));
        }
    }
    let _ = DyadicCover::<1>::from_json(text, 0.5);
});
