#![no_main]

use fnls_core::io::parse_manifest_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = parse_manifest_str(text) {
        let again = parse_manifest_str(&manifest.to_json()).expect("serialized manifest parses");
        assert_eq!(again, manifest);
    }
});
