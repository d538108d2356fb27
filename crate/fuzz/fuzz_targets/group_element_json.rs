#![no_main]
use libfuzzer_sys::fuzz_target;
use rplab::GroupElement;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = GroupElement::from_json(text) {
        let back = GroupElement::from_json(&g.to_json()).expect("serialized element parses");
        assert_eq!(back.shape(), g.shape());
    }
});
