#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::funcspace::SampledFunction;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = SampledFunction::from_csv(text) {
        let back = SampledFunction::from_csv(&s.to_csv()).expect("round trip");
        assert_eq!(back.values(), s.values());
    }
});
