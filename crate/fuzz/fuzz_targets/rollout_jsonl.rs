#![no_main]

use evidence_reward::case::parse_jsonl;
use evidence_reward::Rollout;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_jsonl::<Rollout>(&String::from_utf8_lossy(data));
});
