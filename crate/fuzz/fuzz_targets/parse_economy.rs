#![no_main]

use libfuzzer_sys::fuzz_target;
use rentdiv_core::doc::{economy_to_json, parse_economy};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(e) = parse_economy(s) {
        assert_eq!(parse_economy(&economy_to_json(&e)).expect("round trip"), e);
    }
});
