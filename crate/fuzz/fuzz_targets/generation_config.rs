//! Generation configs from untrusted JSON: deserialization and
//! validation must never panic, valid configs must survive a JSON
//! round trip unchanged, and validity must be stable under the round
//! trip.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pl_lab::generate::GenerationConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(cfg) = serde_json::from_slice::<GenerationConfig>(data) else {
        return;
    };
    let valid = cfg.validate().is_ok();
    let text = serde_json::to_string(&cfg).expect("configs serialize");
    let back: GenerationConfig = serde_json::from_str(&text).expect("round trip parses");
    assert_eq!(back, cfg, "JSON round trip changed the config");
    assert_eq!(
        back.validate().is_ok(),
        valid,
        "validity changed across the round trip"
    );
});
