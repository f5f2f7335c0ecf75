//! Replays the checked-in fuzz corpus through the same checks as the fuzz
//! targets, so regressions surface under `cargo test`.

use std::fs;
use std::path::PathBuf;

use lms_core::io::{numbered, read_points, write_csv};
use lms_core::metricnet::MetricNet;
use lms_core::smoothmap::Mlp;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus for {target}");
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn weights_corpus() {
    let mut accepted = 0;
    for (name, bytes) in corpus("weights_json") {
        let text = String::from_utf8(bytes).unwrap();
        match Mlp::from_json(&text) {
            Ok(net) => {
                assert_eq!(Mlp::from_json(&net.to_json()).unwrap(), net, "{name}");
                accepted += 1;
            }
            Err(_) => assert!(
                ["empty_layers.json", "unsupported_activation.json", "short_weights.json"].contains(&name.as_str()),
                "{name} should parse"
            ),
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn metricnet_corpus() {
    for (name, bytes) in corpus("metricnet_json") {
        let text = String::from_utf8(bytes).unwrap();
        match MetricNet::from_json(&text) {
            Ok(m) => {
                assert_eq!(MetricNet::from_json(&m.to_json()).unwrap().to_json(), m.to_json(), "{name}");
                assert!(m.predict(&nalgebra::dvector![0.0, 0.0]).is_ok());
            }
            Err(_) => assert_eq!(name, "truncated.json"),
        }
    }
}

#[test]
fn latent_csv_corpus() {
    for (name, bytes) in corpus("latent_csv") {
        match read_points(bytes.as_slice()) {
            Ok(points) => {
                let d = points.first().map_or(0, |p| p.len());
                let header = numbered("z", d);
                let header: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut buf = Vec::new();
                write_csv(&mut buf, &header, points.iter().map(|p| p.as_slice().to_vec())).unwrap();
                assert_eq!(read_points(buf.as_slice()).unwrap(), points, "{name}");
            }
            Err(_) => assert!(["ragged.csv", "nan.csv"].contains(&name.as_str()), "{name} should parse"),
        }
    }
}
