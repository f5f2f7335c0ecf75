#![no_main]

use libfuzzer_sys::fuzz_target;
use lms_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_toml(text) else {
        return;
    };
    let echoed = toml::to_string(&cfg).expect("accepted config serializes");
    let again = RunConfig::from_toml(&echoed).expect("echoed config parses");
    // Compared as text so that NaN fields still count as equal.
    assert_eq!(echoed, toml::to_string(&again).unwrap());
    assert_eq!(echoed, toml::to_string(&cfg.over(&RunConfig::default())).unwrap());
});
