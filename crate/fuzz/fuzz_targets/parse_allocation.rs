#![no_main]

use libfuzzer_sys::fuzz_target;
use rentdiv_core::doc::{allocation_to_json, parse_allocation};
use rentdiv_core::instances::e2;
use rentdiv_core::model::is_maxmin;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let e = e2();
    if let Ok(z) = parse_allocation(s, &e) {
        assert_eq!(parse_allocation(&allocation_to_json(&e, &z), &e).expect("round trip"), z);
        is_maxmin(&e, &z).expect("validated allocations can be checked");
    }
});
