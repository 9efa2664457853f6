#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_core::dyadic::DeltaSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = DeltaSet::<2>::from_json(text) {
        let back = DeltaSet::<2>::from_json(&set.to_json()).expect("round trip");
        assert_eq!(back.len(), set.len());
    }
});
