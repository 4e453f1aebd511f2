//! Image-file decoder: must reject malformed input without panicking,
//! and serialization must invert parsing bit for bit.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pl_lab::data::{parse_idx_images, serialize_idx_images};

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        let bytes = serialize_idx_images(&images).expect("parsed images serialize");
        assert_eq!(bytes, data, "serialize is not the inverse of parse");
    }
});
