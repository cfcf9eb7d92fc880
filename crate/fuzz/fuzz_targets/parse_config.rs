#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = hetpol::scenario::parse_config(text) {
            let again = hetpol::scenario::parse_config(&hetpol::scenario::to_text(&config));
            assert!(again.is_ok(), "serialized config no longer parses");
        }
    }
});
