#![no_main]
use hedzoc::problems::ProblemFamily;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // keep the reference solve cheap
    if data.len() > 16 * 1024 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(fam) = ProblemFamily::from_json(text) else { return };
    let once = fam.to_json().expect("accepted family serializes");
    let twice = ProblemFamily::from_json(&once).expect("serialized family parses").to_json().unwrap();
    assert_eq!(once, twice);
});
