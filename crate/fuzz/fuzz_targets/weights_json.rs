#![no_main]

use libfuzzer_sys::fuzz_target;
use lms_core::smoothmap::{decode, Decoder, Mlp};
use nalgebra::DVector;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(net) = Mlp::from_json(text) else {
        return;
    };
    // Accepted files must re-serialize to an equal network.
    let again = Mlp::from_json(&net.to_json()).expect("round trip of an accepted weights file");
    assert_eq!(net, again);

    let params: usize = net.layers().iter().map(|l| l.inputs() * l.outputs()).sum();
    if params <= 1 << 16 {
        let f = Decoder::Mlp(net);
        let z = DVector::zeros(f.latent_dim());
        let _ = decode(&f, &z);
    }
});
