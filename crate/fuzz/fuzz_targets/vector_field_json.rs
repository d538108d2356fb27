#![no_main]
use libfuzzer_sys::fuzz_target;
use rplab::euler_scheme::VectorFieldFamily;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = VectorFieldFamily::from_json(text);
    }
});
