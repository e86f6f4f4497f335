#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::experiments::LossReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = LossReport::from_json(text) {
        let again = r.to_json().expect("serializes");
        let back = LossReport::from_json(&again).expect("round trip");
        assert_eq!(back.to_csv(), r.to_csv());
    }
});
