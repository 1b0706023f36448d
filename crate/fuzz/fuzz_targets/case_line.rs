#![no_main]

use evidence_reward::case::parse_cases;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cases) = parse_cases(&String::from_utf8_lossy(data)) {
        for c in &cases {
            assert!(c.validate().is_ok());
        }
    }
});
