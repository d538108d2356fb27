#![no_main]
use libfuzzer_sys::fuzz_target;
use rplab_cli::Knobs;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = Knobs::from_toml(text) {
        assert_eq!(Knobs::from_toml(&k.to_toml()).ok().map(|b| b.to_toml()), Some(k.to_toml()));
    }
});
