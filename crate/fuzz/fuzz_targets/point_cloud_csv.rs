#![no_main]

use libfuzzer_sys::fuzz_target;
use projlab_core::fractal::PointCloud;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cloud) = PointCloud::from_csv(text, 1.0 / 64.0) {
        let _ = cloud.cells();
        let back = PointCloud::from_csv(&cloud.to_csv(), 1.0 / 64.0).expect("round trip");
        assert_eq!(back.len(), cloud.len());
    }
});
