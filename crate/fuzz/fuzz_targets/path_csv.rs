#![no_main]
use libfuzzer_sys::fuzz_target;
use rplab::PiecewiseLinearPath;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = PiecewiseLinearPath::from_csv(text) {
        let back = PiecewiseLinearPath::from_csv(&x.to_csv()).expect("serialized path parses");
        assert_eq!(back.dim(), x.dim());
    }
});
