#![no_main]

use fnls_core::io::parse_config_str;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = parse_config_str(text) else {
        return;
    };
    // Resolution may reject the values but must not panic.
    let _ = config.resolve();
    let again = parse_config_str(&config.to_json()).expect("serialized config parses");
    assert_eq!(again, config);
});
