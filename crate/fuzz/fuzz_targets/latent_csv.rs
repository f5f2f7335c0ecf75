#![no_main]

use libfuzzer_sys::fuzz_target;
use lms_core::io::{numbered, read_points, write_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(points) = read_points(data) else {
        return;
    };
    let Some(first) = points.first() else {
        return;
    };
    let d = first.len();
    assert!(points.iter().all(|p| p.len() == d && p.iter().all(|v| v.is_finite())));

    let mut buf = Vec::new();
    let header = numbered("z", d);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&mut buf, &header, points.iter().map(|p| p.as_slice().to_vec())).unwrap();
    let again = read_points(buf.as_slice()).expect("written CSV must parse");
    assert_eq!(points, again);
});
