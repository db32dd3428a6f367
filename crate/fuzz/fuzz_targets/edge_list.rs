//! Edge lists: parse errors never panic, and accepted graphs round-trip.
#![no_main]
use hedzoc::graph::Graph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(g) = Graph::parse_edge_list(text) else { return };
    let back = Graph::parse_edge_list(&g.to_edge_list()).expect("written edge list parses");
    assert_eq!(back, g);
});
