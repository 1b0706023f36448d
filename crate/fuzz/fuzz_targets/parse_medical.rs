#![no_main]

use evidence_reward::parser::{format_reward, parse_bytes, ParseOptions};
use evidence_reward::Domain;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for opts in [ParseOptions::default(), ParseOptions::strict()] {
        let p = parse_bytes(Domain::Medical, data, &opts);
        let r = format_reward(&p);
        assert!(r == 0.0 || r == 1.0);
        if p.format_valid {
            assert_eq!(p.predictions.len(), opts.expected_diagnoses);
            let again = parse_bytes(Domain::Medical, p.to_canonical_json().to_string().as_bytes(), &opts);
            assert_eq!(again.predictions, p.predictions);
        }
    }
});
