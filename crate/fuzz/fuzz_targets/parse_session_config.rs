#![no_main]

use libfuzzer_sys::fuzz_target;
use rentdiv_service::elicitation::{ElicitationSession, SessionConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = serde_json::from_slice::<SessionConfig>(data) else { return };
    if let Ok(s) = ElicitationSession::new("fuzz".into(), cfg) {
        s.next_question().expect("new sessions have a question");
    }
});
