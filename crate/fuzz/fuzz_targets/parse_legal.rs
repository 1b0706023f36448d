#![no_main]

use evidence_reward::parser::{normalize_letter, parse_bytes, ParseOptions};
use evidence_reward::Domain;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let p = parse_bytes(Domain::Legal, data, &ParseOptions::default());
    assert!(p.predictions.len() <= 1);
    for pred in &p.predictions {
        assert!(normalize_letter(&pred.label).is_some());
    }
});
