#![no_main]

use libfuzzer_sys::fuzz_target;
use rentdiv_service::elicitation::{AnswerRequest, ElicitationSession, SessionConfig};

fuzz_target!(|data: &[u8]| {
    let cfg: SessionConfig = serde_json::from_str(r#"{"agents": ["1", "2"], "rooms": ["a", "b"], "total_rent": "800"}"#).unwrap();
    let mut s = ElicitationSession::new("fuzz".into(), cfg).unwrap();
    // Newline-separated answers applied in order.
    for line in data.split(|&b| b == b'\n') {
        let Ok(req) = serde_json::from_slice::<AnswerRequest>(line) else { continue };
        let before = s.clone();
        if s.answer(&req.agent, req.answer).is_err() {
            assert_eq!(s, before, "rejected answers leave the session unchanged");
        }
        if !s.is_done() {
            s.next_question().expect("open sessions have a question");
        }
    }
    if s.is_done() {
        s.build_economy().expect("finished sessions build");
    }
});
