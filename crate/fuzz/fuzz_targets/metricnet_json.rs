#![no_main]

use libfuzzer_sys::fuzz_target;
use lms_core::metricnet::MetricNet;
use nalgebra::DVector;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(model) = MetricNet::from_json(text) else {
        return;
    };
    let again = MetricNet::from_json(&model.to_json()).expect("round trip of an accepted model file");
    assert_eq!(model.to_json(), again.to_json());

    let r = model.region();
    let center = DVector::from_iterator(r.dim(), r.lo.iter().zip(&r.hi).map(|(a, b)| 0.5 * (a + b)));
    // Predictions may be rejected as invalid metrics, but never panic.
    let _ = model.predict(&center);
});
