#![no_main]

use evidence_reward::EngineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = EngineConfig::from_json(&String::from_utf8_lossy(data)) {
        assert!(cfg.validate().is_ok());
    }
});
