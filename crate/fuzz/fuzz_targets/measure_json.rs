#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_core::fractal::DyadicMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mu) = DyadicMeasure::<3>::from_json(text) {
        let _ = mu.total_mass();
        let _ = DyadicMeasure::<3>::from_json(&mu.to_json()).expect("round trip");
    }
    let _ = DyadicMeasure::<2>::from_json(text);
});
