#![no_main]

use evidence_reward::retrieval::VectorIndex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = VectorIndex::from_json(&String::from_utf8_lossy(data)) {
        if !index.is_empty() {
            let mut q = vec![0.0; index.dimension];
            q[0] = 1.0;
            let hits = index.search(&q, 3).unwrap();
            assert!(hits.iter().all(|h| (-1.0..=1.0).contains(&h.similarity)));
        }
    }
});
