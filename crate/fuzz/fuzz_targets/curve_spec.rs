#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_core::{Curve, CurveSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = CurveSpec::from_json(text) {
        if let Ok(c) = Curve::from_spec(&spec) {
            let (lo, hi) = c.domain();
            let _ = c.frame(0.5 * (lo + hi));
        }
    }
});
