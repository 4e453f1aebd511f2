//! Label-file decoder: must reject malformed input without panicking,
//! and serialization must invert parsing bit for bit.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pl_lab::data::{parse_idx_labels, serialize_idx_labels};

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_idx_labels(data) {
        let bytes = serialize_idx_labels(&labels).expect("parsed labels serialize");
        assert_eq!(bytes, data, "serialize is not the inverse of parse");
    }
});
