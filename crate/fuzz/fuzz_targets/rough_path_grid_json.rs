#![no_main]
use libfuzzer_sys::fuzz_target;
use rplab::RoughPathGrid;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = RoughPathGrid::from_json(text, |_| Ok(None));
    }
});
