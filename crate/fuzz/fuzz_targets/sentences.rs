#![no_main]

use evidence_reward::sentences::split_sentences;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let parts = split_sentences(&text);
    let kept: usize = parts.iter().map(|s| s.chars().filter(|c| !c.is_whitespace()).count()).sum();
    let total = text.chars().filter(|c| !c.is_whitespace()).count();
    assert_eq!(kept, total);
});
