#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::funcspace::GridFunction;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = GridFunction::from_csv(text) {
        let back = GridFunction::from_csv(&f.to_csv()).expect("round trip");
        assert_eq!(back.values(), f.values());
    }
});
