#![no_main]

use libfuzzer_sys::fuzz_target;

use siet::jscc::SourceModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = SourceModel::from_json(text) {
        let again = s.to_json().expect("serializes");
        SourceModel::from_json(&again).expect("round trip");
    }
});
