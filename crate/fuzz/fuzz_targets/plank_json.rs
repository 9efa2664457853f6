#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_core::geometry::Plank;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = Plank::from_json(text) {
        assert!(p.contains(&p.center));
        let _ = p.intersects(&p);
    }
    if let Ok(list) = Plank::list_from_json(text) {
        let _ = Plank::list_to_json(&list);
    }
});
