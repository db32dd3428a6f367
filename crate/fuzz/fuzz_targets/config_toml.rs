//! Config parsing never panics, and accepted configs survive a TOML round trip.
#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = hedzoc::harness::parse_config(text) else { return };
    let out = toml::to_string(&cfg).expect("accepted config serializes");
    let back = hedzoc::harness::parse_config(&out).expect("serialized config parses");
    assert_eq!(back, cfg);
});
