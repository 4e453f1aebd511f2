//! Candidate-set dataset files: decoding must never panic, and any
//! accepted input must re-serialize to a canonical fixed point
//! (accepted inputs may differ from canonical form in JSON
//! whitespace, so write(read(x)) == x is only required once
//! canonicalized).

#![no_main]

use libfuzzer_sys::fuzz_target;
use pl_lab::data::{read_pl_dataset_bytes, write_pl_dataset_bytes};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_pl_dataset_bytes(data) {
        let canonical = write_pl_dataset_bytes(&ds).expect("accepted dataset serializes");
        let reparsed = read_pl_dataset_bytes(&canonical).expect("canonical form parses");
        assert_eq!(reparsed, ds, "canonicalization changed the dataset");
        let again = write_pl_dataset_bytes(&reparsed).expect("canonical dataset serializes");
        assert_eq!(again, canonical, "canonical form is not a fixed point");
    }
});
