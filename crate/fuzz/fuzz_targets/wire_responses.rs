#![no_main]

use evidence_reward::backend::wire::{
    decode_embed_response, decode_judge_response, decode_nli_response, decode_tokenize_response,
};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&n, body)) = data.split_first() else {
        return;
    };
    let n = usize::from(n % 8);
    if let Ok(t) = decode_nli_response(n, body) {
        assert_eq!(t.len(), n);
    }
    if let Ok(v) = decode_embed_response(n, body) {
        assert_eq!(v.len(), n);
    }
    if let Ok(spans) = decode_tokenize_response(n, body) {
        assert!(spans.iter().flatten().all(|(s, e)| s <= e));
    }
    let _ = decode_judge_response("0", body);
});
