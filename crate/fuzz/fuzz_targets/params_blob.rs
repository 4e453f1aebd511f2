//! Model parameter blobs: decoding must never panic on corrupt bytes,
//! and any accepted blob must re-serialize to a canonical fixed point.
//! Comparison happens on bytes, which also pins NaN payload bits.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pl_lab::train::{params_from_bytes, params_to_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok((spec, params)) = params_from_bytes(data) {
        let canonical = params_to_bytes(&spec, &params).expect("accepted blob serializes");
        let (spec2, params2) = params_from_bytes(&canonical).expect("canonical blob parses");
        let again = params_to_bytes(&spec2, &params2).expect("canonical blob serializes");
        assert_eq!(again, canonical, "canonical form is not a fixed point");
    }
});
