#![no_main]

use fnls_core::lattice::dump::{decode_field, encode_field};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = decode_field(data) {
        // Accepted dumps are canonical: re-encoding gives the same bytes.
        assert_eq!(encode_field(&field), data);
    }
});
