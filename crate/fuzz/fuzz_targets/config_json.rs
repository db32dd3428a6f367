#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // force the JSON path whatever the first byte is
    let text = format!("{{{}", text.trim_start().trim_start_matches('{'));
    if let Ok(cfg) = hedzoc::harness::parse_config(&text) {
        assert!(cfg.horizon() >= 1);
        let _ = cfg.compressor_kind();
    }
});
