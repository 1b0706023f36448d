#![no_main]

use evidence_reward::correctness::parse_verdict;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(v) = parse_verdict(&text) {
        let clean = text.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim().to_ascii_uppercase();
        assert_eq!(clean == "TRUE", v);
    }
});
